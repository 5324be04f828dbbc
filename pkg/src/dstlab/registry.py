"""Static registry of named constants with published reference values and tolerances."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from . import asymptotics as A


@dataclass(frozen=True)
class Entry:
    key: str
    b: int | None
    compute: Callable[[], A.ConstantResult]
    reference: float | None = None
    tol: float | None = None

    @property
    def anchored(self) -> bool:
        return self.reference is not None


def _plain(name: str, value: float, method: str, b: int | None = 1) -> A.ConstantResult:
    return A.ConstantResult(name, value, 1e-14, method, None, b)


def _depth(field: str) -> Callable[[], A.ConstantResult]:
    return lambda: _plain(f"depth {field}", A.depth_constants()[field], "closed-form")


def _ipl(field: str) -> Callable[[], A.ConstantResult]:
    return lambda: _plain(f"ipl mean {field}", A.ipl_mean_constants()[field], "closed-form")


def _build() -> list[Entry]:
    out = [
        Entry("c_kps", 1, A.ckps, 0.2660036454, 1e-7),
        Entry("c_kps_laplace", 1, A.ckps_laplace, 0.2660036454, 1e-7),
    ]
    out += [Entry("c_h", b, (lambda b=b: A.c_h(b)), A.C_H_TABLE[b], 5e-4) for b in range(1, 6)]
    out += [Entry("c10", b, (lambda b=b: A.c10(b)), A.C10_TABLE[b], 1e-4) for b in range(1, 7)]
    out += [
        Entry("c_fs", 1, A.c_fs, 0.3720486812, 1e-6),
        Entry("c_kp", 1, A.c_kp, 0.034203, 5e-4),
        Entry("c_kp_closed", 1, A.c_kp_closed, 0.034203, 5e-4),
        Entry("c_w", 1, A.c_w, 1.1030266959, 1e-6),
        Entry("ppl_var_mean", 1, A.ppl_var_mean),
        Entry("dpl_mean", 1, A.dpl_mean_constant, 1.3390746494, 1e-6),
        Entry("dpl_var_slope", 1, lambda: _plain("DPL variance slope", 1 - 2 / math.pi, "closed-form")),
        Entry("npl_p20_mean", 2, lambda: A.npl_p20_mean(2)),
        Entry("depth_mean", None, _depth("mean")),
        Entry("depth_variance", None, _depth("variance")),
        Entry("ipl_mean_linear", 1, _ipl("linear")),
        Entry("ipl_mean_constant", 1, _ipl("constant")),
    ]
    return out


REGISTRY: tuple[Entry, ...] = tuple(_build())


def select(pattern: str | None = None) -> list[Entry]:
    """Entries whose key contains ``pattern`` (all entries when empty)."""
    if not pattern:
        return list(REGISTRY)
    return [e for e in REGISTRY if pattern in e.key]


@dataclass
class Row:
    key: str
    b: int | None
    value: float | None
    est_error: float | None
    method: str
    reference: float | None
    tol: float | None
    status: str
    error: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def evaluate(entry: Entry, tol: float | None = None) -> Row:
    """Evaluate one entry; failures are captured in the row instead of raised."""
    tol = entry.tol if tol is None else tol
    try:
        r = entry.compute()
    except Exception as exc:  # reported per row
        return Row(entry.key, entry.b, None, None, "", entry.reference, tol, "error", str(exc))
    value = float(r.value.real) if isinstance(r.value, complex) else float(r.value)
    if entry.anchored:
        status = "pass" if abs(value - entry.reference) <= tol else "fail"
    else:
        status = "computed"
    return Row(entry.key, entry.b, value, float(r.est_error), r.method, entry.reference, tol, status)
