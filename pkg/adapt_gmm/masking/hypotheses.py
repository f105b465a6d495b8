"""Null hypothesis types and the containers holding the tested hypotheses.

A single test is described by a HypothesisRecord. The engine, the working model and the simulations operate on the
columnar HypothesisTable, which is built from records or directly from arrays.

Attributes:
    null_kind_names (list[str]): Names accepted by NullType.parse() besides "interval:<delta>".
"""

from enum import Enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class NullKind(str, Enum):
    ONE_SIDED_RIGHT = "one-sided-right"
    ONE_SIDED_LEFT = "one-sided-left"
    POINT = "point"
    INTERVAL = "interval"


null_kind_names = [kind.value for kind in NullKind if kind is not NullKind.INTERVAL]


@dataclass(frozen=True)
class NullType:
    """Type of the null hypothesis H_i on the effect theta_i.

        One-sided right tests theta <= 0, one-sided left tests theta >= 0, point tests theta = 0 and interval tests
        |theta| <= delta, where delta has the units of theta (the scale of z).

        Attributes:
            kind (NullKind): Which of the four null families.
            delta (float): Half width of the interval null, zero for the other kinds.
    """

    kind: NullKind = NullKind.ONE_SIDED_RIGHT
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NullKind(self.kind))
        object.__setattr__(self, "delta", float(self.delta))
        if self.delta < 0:
            raise ValueError(f"Expected a nonnegative interval half width but found {self.delta}.")
        if self.kind is not NullKind.INTERVAL and self.delta != 0.0:
            raise ValueError(f"Only interval nulls carry a half width, but found delta={self.delta} for {self.kind.value}.")

    @classmethod
    def one_sided_right(cls) -> "NullType":
        return cls(NullKind.ONE_SIDED_RIGHT)

    @classmethod
    def one_sided_left(cls) -> "NullType":
        return cls(NullKind.ONE_SIDED_LEFT)

    @classmethod
    def point(cls) -> "NullType":
        return cls(NullKind.POINT)

    @classmethod
    def interval(cls, delta: float) -> "NullType":
        return cls(NullKind.INTERVAL, delta)

    @classmethod
    def parse(cls, text: str) -> "NullType":
        """Parses the command line notation, for example "point" or "interval:1.5".
        """
        text = text.strip().lower()
        if text.startswith("interval"):
            _, sep, value = text.partition(":")
            if not sep or not value:
                raise ValueError(f"Expected interval:<delta> but found '{text}'.")
            return cls.interval(float(value))
        if text not in null_kind_names:
            raise ValueError(f"Unknown null type '{text}'. Expected one of {null_kind_names} or interval:<delta>.")
        return cls(NullKind(text))

    @property
    def is_one_sided(self) -> bool:
        return self.kind in (NullKind.ONE_SIDED_RIGHT, NullKind.ONE_SIDED_LEFT)

    @property
    def is_point(self) -> bool:
        return self.kind is NullKind.POINT

    @property
    def is_interval(self) -> bool:
        return self.kind is NullKind.INTERVAL

    @property
    def n_candidates(self) -> int:
        """Number of z values consistent with one masked p-value."""
        return 4 if self.is_interval else 2

    def __str__(self) -> str:
        if self.is_interval:
            return f"interval:{self.delta:g}"
        return self.kind.value


@dataclass(frozen=True)
class HypothesisRecord:
    """One test: a covariate vector, a p-value and/or a z-value with standard error, and the null type.

        Attributes:
            x (tuple): Covariates of the test.
            p (float): p-value, optional when z is given.
            z (float): Test statistic, optional when p is given.
            se (float): Standard error of z, defaults to 1 when z is given alone.
            null (NullType): Null hypothesis tested.
            id (str): Identifier used in output files.
    """

    x: tuple = ()
    p: Optional[float] = None
    z: Optional[float] = None
    se: Optional[float] = None
    null: NullType = field(default_factory=NullType.one_sided_right)
    id: Optional[str] = None


@dataclass(frozen=True, eq=False)
class HypothesisTable:
    """Columnar view of n hypotheses sharing one null type.

        Attributes:
            x (np.ndarray): Covariates of shape (n, d), d may be zero.
            p (np.ndarray): p-values of shape (n,).
            z (np.ndarray): z-values of shape (n,), NaN where unknown.
            sigma (np.ndarray): Standard errors of shape (n,), one where unknown.
            null (NullType): Null hypothesis shared by all tests.
            ids (tuple): Identifiers of the hypotheses.
    """

    x: np.ndarray
    p: np.ndarray
    z: np.ndarray
    sigma: np.ndarray
    null: NullType
    ids: tuple

    def __len__(self) -> int:
        return len(self.p)

    @property
    def has_z(self) -> bool:
        """True if every hypothesis carries its z-value."""
        return bool(len(self.z) > 0 and np.all(np.isfinite(self.z)))

    @classmethod
    def from_arrays(cls,
                    p: Optional[Sequence]=None,
                    z: Optional[Sequence]=None,
                    sigma: Optional[Sequence]=None,
                    x: Optional[np.ndarray]=None,
                    null: Optional[NullType]=None,
                    ids: Optional[Sequence]=None) -> "HypothesisTable":
        """Builds a table, computing p from (z, sigma) where p is not given.

        Args:
            p (Sequence): p-values, or None.
            z (Sequence): z-values, or None.
            sigma (Sequence): Standard errors of z, default one.
            x (np.ndarray): Covariates as (n,) or (n, d) array, default no covariates.
            null (NullType): Null hypothesis, default one-sided right.
            ids (Sequence): Identifiers, default "0", "1", ...

        Returns:
            The validated HypothesisTable.
        """
        from adapt_gmm.masking.transforms import p_value_array

        null = NullType.one_sided_right() if null is None else null
        if p is None and z is None:
            raise ValueError("Expected p-values or z-values but found neither.")

        n = len(p) if p is not None else len(z)
        z_arr = np.full(n, np.nan) if z is None else np.asarray(z, dtype=float).reshape(n)
        sigma_arr = np.ones(n) if sigma is None else np.asarray(sigma, dtype=float).reshape(n)
        sigma_arr = np.where(np.isfinite(sigma_arr), sigma_arr, 1.0)
        if np.any(sigma_arr <= 0):
            raise ValueError(f"Expected positive standard errors but found {sigma_arr[sigma_arr <= 0][:5]}.")

        if p is None:
            p_arr = p_value_array(z_arr, sigma_arr, null)
        else:
            p_arr = np.asarray(p, dtype=float).reshape(n).copy()
            missing = ~np.isfinite(p_arr)
            if np.any(missing & ~np.isfinite(z_arr)):
                raise ValueError("Every hypothesis needs a p-value or a z-value.")
            p_arr[missing] = p_value_array(z_arr[missing], sigma_arr[missing], null)
        if np.any((p_arr < 0) | (p_arr > 1)):
            raise ValueError(f"Expected p-values in [0, 1] but found {p_arr[(p_arr < 0) | (p_arr > 1)][:5]}.")

        if x is None:
            x_arr = np.zeros((n, 0))
        else:
            x_arr = np.asarray(x, dtype=float)
            x_arr = x_arr.reshape(n, -1) if x_arr.ndim != 2 else x_arr
        if x_arr.shape[0] != n:
            raise ValueError(f"Expected covariates for {n} hypotheses but found {x_arr.shape[0]} rows.")

        ids = tuple(str(i) for i in range(n)) if ids is None else tuple(str(i) for i in ids)
        return cls(x=x_arr, p=p_arr, z=z_arr, sigma=sigma_arr, null=null, ids=ids)

    @classmethod
    def from_records(cls, records: Sequence[HypothesisRecord]) -> "HypothesisTable":
        """Builds a table from a nonempty list of records with a common null type and covariate dimension."""
        if len(records) == 0:
            raise ValueError("Expected at least one hypothesis.")
        nulls = {record.null for record in records}
        if len(nulls) != 1:
            raise ValueError(f"Expected a single null type but found {sorted(str(n) for n in nulls)}.")
        dims = {len(record.x) for record in records}
        if len(dims) != 1:
            raise ValueError(f"Expected covariates of equal length but found lengths {sorted(dims)}.")

        def _column(name):
            values = [getattr(record, name) for record in records]
            return np.array([np.nan if v is None else v for v in values], dtype=float)

        return cls.from_arrays(
            p=_column("p"),
            z=_column("z"),
            sigma=_column("se"),
            x=np.array([record.x for record in records], dtype=float).reshape(len(records), dims.pop()),
            null=nulls.pop(),
            ids=[record.id if record.id is not None else str(i) for i, record in enumerate(records)],
        )

    def to_records(self) -> list:
        """Inverse of from_records()."""
        has_z = np.isfinite(self.z)
        return [
            HypothesisRecord(
                x=tuple(self.x[i]),
                p=float(self.p[i]),
                z=float(self.z[i]) if has_z[i] else None,
                se=float(self.sigma[i]) if has_z[i] else None,
                null=self.null,
                id=self.ids[i],
            ) for i in range(len(self))
        ]
