"""Console logging and JSONL step records for experiment runs."""

import json
import logging
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

_write_lock = threading.Lock()


def setup_logging(
    log_file: Optional[Path] = None,
    verbose: bool = False,
) -> None:
    """Configure the root logger for a command.

    Args:
        log_file: Optional file that also receives every record
        verbose: DEBUG instead of INFO
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        force=True,
    )
    # numba's compiler chatter drowns everything else at DEBUG
    logging.getLogger("numba").setLevel(logging.WARNING)

    if log_file:
        handler = logging.FileHandler(log_file)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logging.getLogger().addHandler(handler)


def log_step(
    step: str,
    data: Dict[str, Any],
    log_file: Optional[Path] = None,
) -> None:
    """Record one step (load, cell_start, cell_done, write, ...) as a JSON object.

    Safe to call from pool workers; file appends are serialized.

    Args:
        step: Step name
        data: Step fields; numpy scalars and paths are coerced
        log_file: JSONL file to append to; without one the entry goes to the logger
    """
    entry = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "step": step,
        **data,
    }
    line = json.dumps(entry, default=_coerce)

    if log_file:
        with _write_lock, open(log_file, "a") as f:
            f.write(line + "\n")
    else:
        logging.getLogger("recovery").info(line)


def _coerce(value: Any) -> Any:
    if hasattr(value, "item"):
        return value.item()
    return str(value)
