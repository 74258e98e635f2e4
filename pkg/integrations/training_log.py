"""
Per-step loss log as a CSV table (columns: step, d_loss, g_adv, g_rec, g_total).
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Union

import pandas as pd

COLUMNS = ["step", "d_loss", "g_adv", "g_rec", "g_total"]


class TrainingLog:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def exists(self) -> bool:
        return self.path.is_file()

    def append(self, rows: List[Dict[str, float]]) -> None:
        if not rows:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(rows, columns=COLUMNS)
        frame.to_csv(self.path, mode="a", header=not self.exists(), index=False)

    def read(self) -> pd.DataFrame:
        if not self.exists():
            return pd.DataFrame(columns=COLUMNS)
        return pd.read_csv(self.path, float_precision="round_trip")

    def truncate(self, step: int) -> None:
        """Drop rows logged after ``step`` (a resumed run rewrites them)"""
        if not self.exists():
            return
        frame = self.read()
        frame[frame["step"] <= step].to_csv(self.path, index=False)

    def reset(self) -> None:
        if self.exists():
            self.path.unlink()
