"""Entry point for python -m ctwrc."""

import os
os.environ.setdefault("PYTHONUNBUFFERED", "1")

from ctwrc.cli import app

if __name__ == "__main__":
    app()
