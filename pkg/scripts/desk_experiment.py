"""
Desk-scale run of the whole pipeline through the CLI: synth, train, eval, listening sets.

    python scripts/desk_experiment.py --work .desk --epochs 30
"""
import argparse
import json
from pathlib import Path

from apps.stemsim_cli.main import main as stemsim

p = argparse.ArgumentParser()
p.add_argument("--work", default=".desk")
p.add_argument("--epochs", type=int, default=30)
p.add_argument("--trials", type=int, default=2)
p.add_argument("--seed", type=int, default=7)
args = p.parse_args()

work = Path(args.work)
corpus, runs = work / "corpus", work / "runs"
common = ["--manifest", str(corpus), "--runs", str(runs), "--seed", str(args.seed), "--cache-dir", str(work / "cache")]

steps = [
    ["synth", "--train", "20", "--test", "8", "--duration", "70", "--seed", str(args.seed), "--out", str(corpus)],
    ["train", *common, "--role", "all", "--epochs", str(args.epochs), "--trials", str(args.trials)],
    ["eval", *common, "--roles", "all"],
    ["listening-sets", *common, "--role", "all"],
]
for step in steps:
    print(">>", " ".join(step))
    code = stemsim(step)
    if code != 0:
        raise SystemExit(code)

report = json.loads((runs / "eval" / "report.json").read_text())
for role, r in report["roles"].items():
    print(f"{role:8s} acc={r['mean_accuracy']:.3f} var={r['accuracy_variance']:.5f} consistency={r['trial_consistency_spearman']}")
