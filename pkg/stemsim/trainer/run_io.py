from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Tuple

from stemsim.encoder import EncoderParams, load_model, save_model
from stemsim.errors import ErrorCode, StemSimError

from .types import TrainedModel

CONFIG_NAME = "config.json"


def model_path(run_dir: Path, trial: int) -> Path:
    return Path(run_dir) / f"trial_{trial}.model"


def loss_path(run_dir: Path, trial: int) -> Path:
    return Path(run_dir) / f"trial_{trial}_loss.csv"


def write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_loss_csv(path: Path, history: List[float]) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["epoch", "mean_loss"])
        for epoch, loss in enumerate(history):
            w.writerow([epoch, repr(float(loss))])


def read_loss_csv(path: Path) -> List[float]:
    with path.open("r", newline="", encoding="utf-8") as f:
        return [float(row["mean_loss"]) for row in csv.DictReader(f)]


def save_run(run_dir: Path, models: List[TrainedModel]) -> Path:
    """config.json plus trial_<t>.model and trial_<t>_loss.csv per trial."""
    run_dir = Path(run_dir)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        if models:
            write_json(run_dir / CONFIG_NAME, models[0].config)
        for m in models:
            save_model(
                model_path(run_dir, m.trial),
                m.params,
                meta={"role": m.role, "trial": m.trial, "seed": m.seed, "steps": m.steps},
            )
            write_loss_csv(loss_path(run_dir, m.trial), m.loss_history)
    except OSError as e:
        raise StemSimError(ErrorCode.IO_ERROR, f"Cannot write run directory: {run_dir}", {"path": str(run_dir)}) from e
    return run_dir


def load_run(run_dir: Path) -> List[TrainedModel]:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise StemSimError(ErrorCode.NOT_FOUND, f"Run directory not found: {run_dir}", {"path": str(run_dir)})
    config: Dict[str, Any] = {}
    if (run_dir / CONFIG_NAME).exists():
        config = json.loads((run_dir / CONFIG_NAME).read_text(encoding="utf-8"))

    found: List[Tuple[int, Path]] = []
    for p in run_dir.glob("trial_*.model"):
        try:
            found.append((int(p.stem.split("_", 1)[1]), p))
        except ValueError:
            continue
    if not found:
        raise StemSimError(ErrorCode.NOT_FOUND, f"No model files in {run_dir}", {"path": str(run_dir)})

    models = []
    for trial, p in sorted(found):
        params, meta = load_model(p)
        lp = loss_path(run_dir, trial)
        models.append(
            TrainedModel(
                role=meta.get("role", run_dir.name),
                trial=trial,
                params=params,
                loss_history=read_loss_csv(lp) if lp.exists() else [],
                config=config,
                steps=int(meta.get("steps", 0)),
            )
        )
    return models
