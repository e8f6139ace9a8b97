"""Exact-match scoring on canonical SMILES."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..chemio import canonical_smiles, smiles_parse


class LineCountMismatch(ValueError):
    pass


_RGROUP_TEXT = [
    (re.compile(r"\[R(\d+)\]"), r"[\1*]"),
    (re.compile(r"\[R'*\]"), "*"),
]


def normalize_smiles(s: str) -> str:
    """Canonical SMILES with R-group labels as stars; only tetrahedral stereo survives.

    Raises the parser's error when ``s`` is not valid SMILES.
    """
    for pat, rep in _RGROUP_TEXT:
        s = pat.sub(rep, s)
    # the reader drops directional bond marks, so cis/trans information is ignored
    return canonical_smiles(smiles_parse(s))


@dataclass
class EvalReport:
    n_total: int
    n_exact: int
    accuracy: float
    verdicts: list[dict] = field(default_factory=list)
    n_excluded: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_total": self.n_total,
                "n_exact": self.n_exact,
                "accuracy": self.accuracy,
                "n_excluded": self.n_excluded,
                "verdicts": self.verdicts,
            },
            sort_keys=True,
            indent=1,
        )


def evaluate_lines(preds: list[str], truth: list[str]) -> EvalReport:
    if len(preds) != len(truth):
        raise LineCountMismatch(f"{len(preds)} predictions for {len(truth)} ground-truth lines")
    verdicts, n_exact, excluded = [], 0, 0
    for k, (p, t) in enumerate(zip(preds, truth)):
        try:
            ref = normalize_smiles(t)
        except Exception:
            excluded += 1
            verdicts.append({"line": k + 1, "verdict": "excluded"})
            continue
        try:
            got = normalize_smiles(p) if p.strip() else None
        except Exception:
            got = None
        match = got == ref
        n_exact += match
        verdicts.append({"line": k + 1, "verdict": "match" if match else "mismatch"})
    n_total = len(preds) - excluded
    acc = n_exact / n_total if n_total else 0.0
    return EvalReport(n_total, n_exact, acc, verdicts, excluded)


def _lines(path) -> list[str]:
    text = Path(path).read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [l.split()[0] if l.strip() else "" for l in lines]


def evaluate(predictions_file, ground_truth_file) -> EvalReport:
    return evaluate_lines(_lines(predictions_file), _lines(ground_truth_file))
