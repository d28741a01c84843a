"""Frequency-side combinatorics of the degree-p convolution.

Every interaction of p modes with the output mode k lives on the
hyperplane k = k1 - k2 + k3 - ... + kp (alternating signs because the
even-indexed slots enter conjugated).  The integer

    Phi = k^2 - k1^2 + k2^2 - k3^2 + ... - kp^2

measures how fast the interaction's relative phase rotates under the
free flow.  Tuples split into three (overlapping) cases:

    A: exactly one odd slot carries the output frequency,
    B: |Phi| >= c_B * max(k1*, 1),
    C: (k3*)^2 >= c_C * k1*  or  k2* >= r_comp * k1*,

where kj* is the j-th largest of |k1|, ..., |kp|.  Coverage (every
constrained tuple satisfies A or B or C) is not an article of faith
here: ``verify_decomposition`` checks it exhaustively on a box, and the
default constants below are exactly the ones that pass that check.

The resonant part of the convolution (tuples with some odd slot equal
to k) splits further: counted with odd-slot multiplicity it collapses
to the closed form ((p+1)/(4 pi)) * u_hat_k * int |u|^(p-1) dx, which a
pure phase rotation can remove; the remainder keeps its inclusion-
exclusion weights.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .dynamics import EquationParams, nonlinearity
from .spectral import SpectralField, lp_norm, modes

# Direct O((2K+1)^4)-per-mode sums are the reference path; beyond this
# window the quintic tensor operators are refused rather than approximated.
MAX_DIRECT_K = 16
ENUMERATION_LIMIT = 130_000_000


class CostBoundError(ValueError):
    """Requested enumeration exceeds the direct-sum budget."""


@dataclass(frozen=True)
class CaseConstants:
    """Explicit constants quantifying the 'much larger' / 'comparable'
    relations of the case split.

    Defaults are pinned by exhaustive enumeration: on the box |k_i| <= 20
    (quintic) they give zero coverage violations with an empirical margin
    min |Phi|/k1* = 6/11 over the not-A, not-C tuples.  Larger constants
    (e.g. c_C = 1) provably fail: (12, 0, 4, 0, -3) -> k = 13 has Phi = 0
    yet satisfies neither A nor C, and scales to an infinite family.
    """

    c_B: float = 0.2
    c_C: float = 0.2
    r_comp: float = 0.4
    gap: float = 2.0

    def __post_init__(self):
        if min(self.c_B, self.c_C, self.r_comp) <= 0:
            raise ValueError("case constants must be positive")
        if not 0 < self.r_comp <= 1:
            raise ValueError(f"r_comp must lie in (0, 1], got {self.r_comp}")
        if self.gap <= 1:
            raise ValueError(f"gap must exceed 1, got {self.gap}")


@dataclass(frozen=True)
class CaseLabel:
    a: bool
    b: bool
    c: bool
    resonant: bool

    @property
    def covered(self) -> bool:
        return self.a or self.b or self.c


@dataclass(frozen=True)
class FrequencyTuple:
    """(k; k1, ..., kp) on the convolution hyperplane."""

    k: int
    k_internal: tuple[int, ...]

    def __post_init__(self):
        ks = np.asarray(self.k_internal, dtype=np.int64)
        if len(ks) % 2 == 0:
            raise ValueError("need an odd number of internal frequencies")
        signs = np.where(np.arange(len(ks)) % 2 == 0, 1, -1)
        if int(np.sum(signs * ks)) != self.k:
            raise ValueError(
                f"hyperplane constraint violated: alternating sum of {self.k_internal} "
                f"is {int(np.sum(signs * ks))}, not {self.k}"
            )

    @property
    def p(self) -> int:
        return len(self.k_internal)


def resonance_function(t: FrequencyTuple) -> int:
    """Phi = k^2 - k1^2 + k2^2 - ... - kp^2, exactly in integer arithmetic."""
    ks = np.asarray(t.k_internal, dtype=np.int64)
    signs = np.where(np.arange(len(ks)) % 2 == 0, 1, -1)
    return int(t.k * t.k - np.sum(signs * ks * ks))


def classify(t: FrequencyTuple, constants: CaseConstants = CaseConstants()) -> CaseLabel:
    ks = np.asarray(t.k_internal, dtype=np.int64)
    mags = np.sort(np.abs(ks))[::-1]
    k1s, k2s, k3s = int(mags[0]), int(mags[1]), int(mags[2])
    odd_matches = int(np.sum(ks[::2] == t.k))
    phi = abs(resonance_function(t))
    return CaseLabel(
        a=odd_matches == 1,
        b=phi >= constants.c_B * max(k1s, 1),
        c=(k3s * k3s >= constants.c_C * k1s) or (k2s >= constants.r_comp * k1s),
        resonant=odd_matches >= 1,
    )


# ----------------------------------------------------------------------
# exhaustive coverage check
# ----------------------------------------------------------------------

@dataclass
class DecompositionReport:
    box: int
    p: int
    constants: CaseConstants
    tuples_checked: int
    violations: int
    min_ratio: Optional[float]       # min |Phi|/k1* over not-A, not-C tuples
    worst_tuple: Optional[tuple]     # (k1..kp, k, Phi) achieving min_ratio
    examples: list[tuple]            # up to 10 violating tuples
    wall_time_ms: float


def _merge_top3(m1, m2, m3, a):
    """Fold magnitudes `a` into a running decreasing top-3."""
    n1 = np.maximum(m1, a)
    n2 = np.where(a >= m1, m1, np.maximum(m2, a))
    n3 = np.where(a >= m2, m2, np.maximum(m3, a))
    return n1, n2, n3


def verify_decomposition(
    box: int, p: int = 5, constants: CaseConstants = CaseConstants()
) -> DecompositionReport:
    """Enumerate every tuple with |k_i| <= box on the hyperplane and count
    tuples outside A, B and C.  The minimum of |Phi|/k1* over the
    not-A, not-C set is the empirical case-B constant for this box."""
    if p < 5 or p % 2 == 0:
        raise ValueError(f"p must be odd and >= 5, got {p}")
    n_side = 2 * box + 1
    total = n_side**p
    if total > ENUMERATION_LIMIT:
        raise CostBoundError(
            f"(2*{box}+1)^{p} = {total:.3g} tuples exceeds the enumeration "
            f"budget of {ENUMERATION_LIMIT:.3g}"
        )

    t0 = time.perf_counter()
    rng = np.arange(-box, box + 1, dtype=np.int64)
    # Inner block: the last four slots p-3..p, signs (-, +, -, +).
    b1, b2, b3, b4 = (x.ravel() for x in np.meshgrid(rng, rng, rng, rng, indexing="ij"))
    inner_base = -b1 + b2 - b3 + b4
    inner_phi = b1 * b1 - b2 * b2 + b3 * b3 - b4 * b4
    zeros = np.zeros_like(b1)
    im1, im2, im3 = zeros, zeros, zeros
    for a in (np.abs(b1), np.abs(b2), np.abs(b3), np.abs(b4)):
        im1, im2, im3 = _merge_top3(im1, im2, im3, a)

    n_lead = p - 4
    lead_signs = [1 if i % 2 == 0 else -1 for i in range(n_lead)]
    lead_odd = [i for i in range(n_lead) if i % 2 == 0]

    violations = 0
    min_ratio = np.inf
    worst = None
    examples: list[tuple] = []

    lead_iter = np.stack(
        [g.ravel() for g in np.meshgrid(*([rng] * n_lead), indexing="ij")], axis=-1
    )
    for lead in lead_iter:
        lead = [int(v) for v in lead]
        lead_base = sum(s * v for s, v in zip(lead_signs, lead))
        lead_phi = sum(-s * v * v for s, v in zip(lead_signs, lead))
        k = lead_base + inner_base
        phi = k * k + lead_phi + inner_phi
        m1, m2, m3 = im1, im2, im3
        for v in lead:
            m1, m2, m3 = _merge_top3(m1, m2, m3, abs(v))
        nmatch = (b2 == k).astype(np.int8) + (b4 == k)
        for i in lead_odd:
            nmatch = nmatch + (lead[i] == k)
        case_a = nmatch == 1
        case_b = np.abs(phi) >= constants.c_B * np.maximum(m1, 1)
        case_c = (m3.astype(np.float64) ** 2 >= constants.c_C * m1) | (
            m2 >= constants.r_comp * m1
        )
        not_ac = ~case_a & ~case_c
        if not_ac.any():
            ratios = np.abs(phi[not_ac]) / m1[not_ac]  # k1* >= 1 off case C
            j = int(np.argmin(ratios))
            if ratios[j] < min_ratio:
                min_ratio = float(ratios[j])
                idx = np.flatnonzero(not_ac)[j]
                worst = (*lead, int(b1[idx]), int(b2[idx]), int(b3[idx]), int(b4[idx]),
                         int(k[idx]), int(phi[idx]))
        bad = not_ac & ~case_b
        n_bad = int(np.count_nonzero(bad))
        violations += n_bad
        if n_bad and len(examples) < 10:
            for idx in np.flatnonzero(bad)[: 10 - len(examples)]:
                examples.append((*lead, int(b1[idx]), int(b2[idx]), int(b3[idx]),
                                 int(b4[idx]), int(k[idx]), int(phi[idx])))

    return DecompositionReport(
        box=box,
        p=p,
        constants=constants,
        tuples_checked=total,
        violations=violations,
        min_ratio=None if np.isinf(min_ratio) else float(min_ratio),
        worst_tuple=worst,
        examples=examples,
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
    )


# ----------------------------------------------------------------------
# direct quintic tensor sums
# ----------------------------------------------------------------------

def _require_direct_path(params: EquationParams, k_max: int) -> None:
    if params.p != 5 or k_max > MAX_DIRECT_K:
        raise CostBoundError(
            f"direct tensor sums support p=5 and K <= {MAX_DIRECT_K} only "
            f"(got p={params.p}, K={k_max}; cost would be "
            f"~{(2 * k_max + 1) ** 5:.2g} terms)"
        )


@lru_cache(maxsize=4)
def _tuple_table(k_max: int):
    """All (k1, k2, k3, k4) blocks for the quintic hyperplane at window K."""
    rng = np.arange(-k_max, k_max + 1, dtype=np.int32)
    k1, k2, k3, k4 = (x.ravel() for x in np.meshgrid(rng, rng, rng, rng, indexing="ij"))
    base = k1 - k2 + k3 - k4  # k5 = k - base
    phi4 = -k1.astype(np.int64) ** 2 + k2.astype(np.int64) ** 2 \
        - k3.astype(np.int64) ** 2 + k4.astype(np.int64) ** 2
    zeros = np.zeros_like(k1)
    m1, m2, m3 = zeros, zeros, zeros
    for a in (np.abs(k1), np.abs(k2), np.abs(k3), np.abs(k4)):
        m1, m2, m3 = _merge_top3(m1, m2, m3, a)
    return dict(k1=k1, k2=k2, k3=k3, k4=k4, base=base, phi4=phi4, m1=m1, m2=m2, m3=m3)


def _quintic_sums(
    slot1: np.ndarray,
    rest: np.ndarray,
    k_max: int,
    select: Optional[Callable[[int, dict], np.ndarray]],
    phi_weight: bool = False,
) -> np.ndarray:
    """sum over hyperplane tuples of c1_{k1} conj(c_{k2}) c_{k3} conj(c_{k4}) c_{k5},
    slot 1 drawn from `slot1`, slots 2..5 from `rest`, optionally restricted
    by `select` and weighted by 1/Phi.  Summation order is fixed by the
    table layout, so results are schedule-independent."""
    tb = _tuple_table(k_max)
    off = k_max
    g4 = (
        slot1[tb["k1"] + off]
        * np.conj(rest[tb["k2"] + off])
        * rest[tb["k3"] + off]
        * np.conj(rest[tb["k4"] + off])
    )
    out = np.zeros(2 * k_max + 1, dtype=np.complex128)
    for j, k in enumerate(range(-k_max, k_max + 1)):
        k5 = k - tb["base"]
        valid = np.abs(k5) <= k_max
        if select is not None or phi_weight:
            phi = k * k + tb["phi4"] - k5.astype(np.int64) ** 2
        env = dict(tb)
        if select is not None:
            env["k5"] = k5
            env["phi"] = phi
            valid = valid & select(k, env)
        if not valid.any():
            continue
        idx5 = np.where(valid, k5 + off, 0)
        terms = g4 * rest[idx5] * valid
        if phi_weight:
            phis = phi[valid]
            if np.any(phis == 0):
                raise RuntimeError(
                    "internal invariant violated: 1/Phi weight requested on a "
                    "tuple with Phi = 0"
                )
            w = np.zeros(len(valid))
            w[valid] = 1.0 / phis
            terms = terms * w
        out[j] = terms.sum()
    return out


def _case_b_gap_select(constants: CaseConstants):
    """Tuples with |k1| >= gap * max(k2*, 1) inside case B (exact Phi test)."""

    def select(k: int, env: dict) -> np.ndarray:
        a5 = np.abs(env["k5"])
        t1, t2, _ = _merge_top3(env["m1"], env["m2"], env["m3"], a5)
        in_gap = np.abs(env["k1"]) >= constants.gap * np.maximum(t2, 1)
        in_b = np.abs(env["phi"]) >= constants.c_B * np.maximum(t1, 1)
        return in_gap & in_b

    return select


def _resonant_select(k: int, env: dict) -> np.ndarray:
    return (env["k1"] == k) | (env["k3"] == k) | (env["k5"] == k)


@dataclass
class NonlinearitySplit:
    """Gauge-removable resonant part, residual resonant part, non-resonant rest."""

    r1: SpectralField
    r2: SpectralField
    nr: SpectralField

    def total(self) -> SpectralField:
        return self.r1 + self.r2 + self.nr


def resonant_projection(f: SpectralField, params: EquationParams) -> SpectralField:
    """The multiplicity-weighted resonant sum in closed form:
    ((p+1)/(4 pi)) * u_hat_k * int |u|^(p-1) dx, valid for every odd p."""
    scale = (params.p + 1) / (4.0 * np.pi) * lp_norm(f, params.p - 1) ** (params.p - 1)
    return SpectralField(f.grid, f.coeffs * scale)


def split_nonlinearity(f: SpectralField, params: EquationParams) -> NonlinearitySplit:
    """Exact three-way split of |u|^(p-1)u by direct summation (quintic only).

    r1 is the closed-form multiplicity-weighted resonant part; r2 the
    once-counted resonant sum minus r1; nr the remaining tuples.  The
    three parts sum to the full convolution coefficientwise.
    """
    _require_direct_path(params, f.grid.max_mode)
    k_max = f.grid.max_mode
    c = f.coeffs
    r1 = resonant_projection(f, params)
    res_once = _quintic_sums(c, c, k_max, _resonant_select)
    full = _quintic_sums(c, c, k_max, None)
    return NonlinearitySplit(
        r1=r1,
        r2=SpectralField(f.grid, res_once - r1.coeffs),
        nr=SpectralField(f.grid, full - res_once),
    )


def high_low_interaction(
    first: SpectralField,
    rest: SpectralField,
    params: EquationParams,
    constants: CaseConstants = CaseConstants(),
) -> SpectralField:
    """((p+1)/2) * sum over gap-separated case-B tuples, `first` in slot 1."""
    if first.grid != rest.grid:
        raise ValueError("first and rest must share a grid")
    _require_direct_path(params, first.grid.max_mode)
    out = _quintic_sums(
        first.coeffs, rest.coeffs, first.grid.max_mode, _case_b_gap_select(constants)
    )
    return SpectralField(first.grid, 0.5 * (params.p + 1) * out)


def normal_form_transform(
    first: SpectralField,
    rest: SpectralField,
    params: EquationParams,
    constants: CaseConstants = CaseConstants(),
) -> SpectralField:
    """Same tuple set as high_low_interaction, each term divided by Phi.

    Case-B membership bounds |Phi| below by c_B * max(k1*, 1) > 0, so the
    weight is finite by construction; a zero Phi aborts loudly.
    """
    if first.grid != rest.grid:
        raise ValueError("first and rest must share a grid")
    _require_direct_path(params, first.grid.max_mode)
    out = _quintic_sums(
        first.coeffs,
        rest.coeffs,
        first.grid.max_mode,
        _case_b_gap_select(constants),
        phi_weight=True,
    )
    return SpectralField(first.grid, 0.5 * (params.p + 1) * out)
