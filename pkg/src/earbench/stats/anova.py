"""Repeated-measures and mixed ANOVA for balanced within-subject designs.

The engine works on per-subject orthonormal contrast scores: each within
effect's sums of squares, error stratum, and Greenhouse-Geisser epsilon come
from the subject-by-contrast score matrix for that effect, and the
between-subjects stratum is a one-way analysis of the per-subject means
(group sizes may differ; within cells must be complete). Effect sizes are
generalized eta squared: effect SS over effect SS plus every subject-related
error SS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import f as f_dist

from earbench.stats.tables import ScoreTable, TableError

_DEGENERATE_REL_TOL = 1e-12


class AnovaError(ValueError):
    """Design is unusable for the requested analysis."""


class ConstantDataError(AnovaError):
    """Zero error sum of squares: the F ratio is undefined."""


@dataclass(frozen=True)
class AnovaResult:
    """One effect line: F test, generalized eta squared, and (for within
    effects) the Greenhouse-Geisser epsilon with the corrected p-value."""

    effect: str
    f: float
    df_num: float
    df_den: float
    p: float
    ges: float
    epsilon_gg: float | None = None
    p_gg: float | None = None

    def __post_init__(self):
        if self.f < 0 or not np.isfinite(self.f):
            raise AnovaError(f"invalid F={self.f} for effect {self.effect}")
        if not 0.0 <= self.p <= 1.0:
            raise AnovaError(f"invalid p={self.p} for effect {self.effect}")
        if not 0.0 <= self.ges <= 1.0:
            raise AnovaError(f"invalid ges={self.ges} for effect {self.effect}")

    @property
    def df_num_gg(self) -> float | None:
        return None if self.epsilon_gg is None else self.epsilon_gg * self.df_num

    @property
    def df_den_gg(self) -> float | None:
        return None if self.epsilon_gg is None else self.epsilon_gg * self.df_den


def gg_corrected_dfs(epsilon: float, df_num: float, df_den: float) -> tuple[float, float]:
    """Greenhouse-Geisser df deflation: both dfs scale by epsilon."""
    return (epsilon * df_num, epsilon * df_den)


def orthonormal_contrasts(k: int) -> np.ndarray:
    """k x (k-1) matrix of orthonormal columns, each orthogonal to the mean."""
    c = np.zeros((k, k - 1))
    for j in range(1, k):
        c[:j, j - 1] = 1.0
        c[j, j - 1] = -j
        c[:, j - 1] /= np.sqrt(j * (j + 1.0))
    return c


def gg_epsilon(cell_scores: np.ndarray) -> float:
    """Box/Greenhouse-Geisser epsilon from a subject-by-condition matrix.

    Uses the double-centered form of the condition covariance matrix and
    clamps to [1/(k-1), 1]. A perfectly spherical covariance gives 1.
    """
    x = np.asarray(cell_scores, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise AnovaError("need a subject-by-condition matrix with at least 2 conditions")
    if x.shape[0] < 2:
        raise AnovaError("need at least 2 subjects")
    k = x.shape[1]
    if k == 2:
        return 1.0
    s = np.cov(x, rowvar=False)
    grand = s.mean()
    diag_mean = np.trace(s) / k
    centered = s - s.mean(axis=0, keepdims=True) - s.mean(axis=1, keepdims=True) + grand
    denom = (k - 1) * np.sum(centered**2)
    if denom <= 0:
        return 1.0
    eps = k * k * (diag_mean - grand) ** 2 / denom
    return float(np.clip(eps, 1.0 / (k - 1), 1.0))


def _epsilon_from_scores(z: np.ndarray, group_ids: np.ndarray, n_groups: int) -> float:
    """Epsilon from effect contrast scores, pooling covariance within groups."""
    d = z.shape[1]
    if d == 1:
        return 1.0
    n = z.shape[0]
    if n - n_groups < 2:
        return 1.0
    resid = z - _group_means(z, group_ids, n_groups)[group_ids]
    s = resid.T @ resid / (n - n_groups)
    tr = np.trace(s)
    tr2 = np.trace(s @ s)
    if tr2 <= 0:
        return 1.0
    return float(np.clip(tr * tr / (d * tr2), 1.0 / d, 1.0))


def _group_means(z: np.ndarray, group_ids: np.ndarray, n_groups: int) -> np.ndarray:
    out = np.zeros((n_groups, z.shape[1]))
    for g in range(n_groups):
        out[g] = z[group_ids == g].mean(axis=0)
    return out


def _check_error_ss(ss_err: float, scale: float, effect: str) -> None:
    if ss_err <= _DEGENERATE_REL_TOL * max(scale, 1e-30):
        raise ConstantDataError(
            f"zero error sum of squares for effect {effect!r} (constant data)"
        )


def anova_from_matrix(
    Y: np.ndarray,
    groups: np.ndarray | None = None,
    factor_names: tuple[str, str] = ("A", "B"),
    between_name: str = "group",
) -> list[AnovaResult]:
    """Split-plot ANOVA on a (subjects, a, b) score array.

    groups=None runs the fully within-subjects analysis; otherwise groups
    labels each subject's between-subjects level.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 3:
        raise AnovaError(f"expected (subjects, a, b) array, got shape {Y.shape}")
    n, a, b = Y.shape
    if n < 2:
        raise AnovaError("at least 2 subjects required")
    if a < 2 or b < 2:
        raise AnovaError("both within factors need at least 2 levels")
    if not np.all(np.isfinite(Y)):
        raise AnovaError("scores contain NaN or Inf (incomplete cells?)")

    if groups is None:
        group_ids = np.zeros(n, dtype=int)
        n_groups = 1
    else:
        labels = sorted(set(groups))
        if len(labels) < 2:
            raise AnovaError(f"between factor {between_name!r} needs at least 2 levels")
        group_ids = np.array([labels.index(g) for g in groups])
        n_groups = len(labels)
        if n - n_groups < 1:
            raise AnovaError("between-subjects error has zero degrees of freedom")

    name_a, name_b = factor_names
    scale = float(np.mean(Y**2)) * Y.size
    group_sizes = np.bincount(group_ids, minlength=n_groups).astype(float)

    u_a = np.full(a, 1.0 / np.sqrt(a))
    u_b = np.full(b, 1.0 / np.sqrt(b))
    c_a = orthonormal_contrasts(a)
    c_b = orthonormal_contrasts(b)

    z0 = np.einsum("sab,a,b->s", Y, u_a, u_b)[:, None]
    z_by_effect = {
        name_a: np.einsum("sab,ai,b->si", Y, c_a, u_b),
        name_b: np.einsum("sab,a,bj->sj", Y, u_a, c_b),
        f"{name_a}:{name_b}": np.einsum("sab,ai,bj->sij", Y, c_a, c_b).reshape(n, -1),
    }

    # between stratum: one-way decomposition of the per-subject means
    gm0 = _group_means(z0, group_ids, n_groups)
    grand0 = z0.mean()
    ss_between = float(np.sum(group_sizes * (gm0[:, 0] - grand0) ** 2))
    ss_subjects = float(np.sum((z0 - gm0[group_ids]) ** 2))
    df_subjects = n - n_groups

    # within strata: effect, group interaction, and subject-interaction error
    stratum = {}
    ss_error_total = ss_subjects
    for effect, z in z_by_effect.items():
        d = z.shape[1]
        zbar = z.mean(axis=0)
        gm = _group_means(z, group_ids, n_groups)
        ss_eff = float(n * np.sum(zbar**2))
        ss_int = float(np.sum(group_sizes[:, None] * (gm - zbar) ** 2))
        ss_err = float(np.sum((z - gm[group_ids]) ** 2))
        eps = _epsilon_from_scores(z, group_ids, n_groups)
        stratum[effect] = (d, ss_eff, ss_int, ss_err, eps)
        ss_error_total += ss_err

    def build(effect, ss_eff, df_num, ss_err, df_den, eps):
        _check_error_ss(ss_err, scale, effect)
        if df_den <= 0:
            raise AnovaError(f"effect {effect!r} has no error degrees of freedom")
        f_val = (ss_eff / df_num) / (ss_err / df_den)
        f_val = max(f_val, 0.0)
        ges = ss_eff / (ss_eff + ss_error_total) if ss_eff > 0 else 0.0
        p = float(f_dist.sf(f_val, df_num, df_den))
        p_gg = None
        if eps is not None:
            d1, d2 = gg_corrected_dfs(eps, df_num, df_den)
            p_gg = float(f_dist.sf(f_val, d1, d2))
        return AnovaResult(
            effect=effect,
            f=float(f_val),
            df_num=float(df_num),
            df_den=float(df_den),
            p=p,
            ges=float(ges),
            epsilon_gg=eps,
            p_gg=p_gg,
        )

    results = []
    if n_groups > 1:
        results.append(
            build(between_name, ss_between, n_groups - 1, ss_subjects, df_subjects, None)
        )
    for effect, (d, ss_eff, ss_int, ss_err, eps) in stratum.items():
        df_err = d * df_subjects
        results.append(build(effect, ss_eff, d, ss_err, df_err, eps))
        if n_groups > 1:
            results.append(
                build(f"{between_name}:{effect}", ss_int, d * (n_groups - 1), ss_err, df_err, eps)
            )
    return results


def rm_anova_2way(
    table: ScoreTable, factor_a: str = "room", factor_b: str = "channels"
) -> list[AnovaResult]:
    """Two-way fully repeated-measures ANOVA on the RAU scores."""
    Y, _, _, _, _ = table.pivot(factor_a, factor_b)
    return anova_from_matrix(Y, groups=None, factor_names=(factor_a, factor_b))


def mixed_anova(
    table: ScoreTable,
    between: str = "location",
    factor_a: str = "room",
    factor_b: str = "channels",
) -> list[AnovaResult]:
    """Mixed ANOVA: one between-subjects factor, two within factors, and all
    interactions, each tested against its own error stratum."""
    Y, _, _, _, groups = table.pivot(factor_a, factor_b)
    if between != "location":
        raise TableError(f"unknown between factor {between!r}")
    return anova_from_matrix(
        Y, groups=groups, factor_names=(factor_a, factor_b), between_name=between
    )
