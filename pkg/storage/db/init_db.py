from __future__ import annotations

from .engine import engine, get_database_url
from .models import Base


def main():
    Base.metadata.create_all(bind=engine())
    print(f"DB initialized (tables created) at {get_database_url()}")


if __name__ == "__main__":
    main()
