"""The masked data in the form the working model consumes.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from adapt_gmm.classifier.features import append_variance_covariate
from adapt_gmm.engine.engine import initial_view
from adapt_gmm.engine.oracle import candidate_log_offset
from adapt_gmm.engine.policies import AnalystView
from adapt_gmm.masking.hypotheses import HypothesisRecord, HypothesisTable, NullType
from adapt_gmm.masking.masking import MaskingParams
from adapt_gmm.masking.transforms import CandidateTable


@dataclass(frozen=True, eq=False)
class ModelData:
    """Candidate z-values with their Jacobian offsets.

        Attributes:
            x (np.ndarray): Covariates fed to the feature maps, shape (n, d).
            z (np.ndarray): Candidate z-values, shape (n, C), NaN where invalid.
            valid (np.ndarray): Candidate consistent with the view, shape (n, C).
            bits (np.ndarray): Blue bit per candidate, shape (n, C).
            sign_bits (np.ndarray): 1{z > 0} per candidate for interval nulls, shape (n, C).
            sigma2 (np.ndarray): Noise variances on the model scale, shape (n,).
            log_offset (np.ndarray): b log(zeta) - log |dp/dz| per candidate, -inf where invalid.
            masked (np.ndarray): Membership of the masking set.
            zeta (float): Stretch factor.
            null (NullType): Null hypothesis on the model scale.
    """

    x: np.ndarray
    z: np.ndarray
    valid: np.ndarray
    bits: np.ndarray
    sign_bits: np.ndarray
    sigma2: np.ndarray
    log_offset: np.ndarray
    masked: np.ndarray
    zeta: float
    null: NullType

    def __len__(self) -> int:
        return self.z.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.z.shape[1]

    @property
    def masked_indices(self) -> np.ndarray:
        return np.flatnonzero(self.masked)

    @property
    def z_filled(self) -> np.ndarray:
        return np.where(self.valid, self.z, 0.0)

    def pooled_candidates(self) -> np.ndarray:
        """All valid candidate z-values as one flat array."""
        return self.z[self.valid]

    @classmethod
    def from_view(cls, view: AnalystView, standardize: bool=True) -> "ModelData":
        return build_model_data(view, standardize)

    @classmethod
    def from_records(cls,
                     records: Union[HypothesisTable, Sequence[HypothesisRecord]],
                     params: MaskingParams,
                     masked: Optional[np.ndarray]=None,
                     standardize: bool=True) -> "ModelData":
        """Model data of the hypotheses with the given masking set, by default M_0."""
        return build_model_data(initial_view(records, params, masked=masked), standardize)


def build_model_data(view: AnalystView, standardize: bool=True) -> ModelData:
    """Turns an analyst view into model data.

    With standardize the model works with z / sigma, unit noise and sigma^2 appended to the covariates when the
    standard errors differ between hypotheses.

    Args:
        view (AnalystView): What the analyst sees.
        standardize (bool): Whether to standardize the z-values.

    Returns:
        The ModelData.
    """
    table = view.candidate_table()
    sigma = np.asarray(view.sigma, dtype=float)

    if standardize:
        z = table.z / sigma[:, None]
        sigma_model = np.ones_like(sigma)
        delta = (view.null.delta / sigma)[:, None]
        x = append_variance_covariate(view.x, sigma)
    else:
        z = table.z
        sigma_model = sigma
        delta = None
        x = view.x

    scaled = CandidateTable(z=z, bits=table.bits, sign_bits=table.sign_bits, valid=table.valid)
    log_offset = candidate_log_offset(scaled, sigma_model, view.null, view.params.zeta, delta=delta)
    return ModelData(
        x=np.asarray(x, dtype=float),
        z=z,
        valid=table.valid,
        bits=table.bits,
        sign_bits=table.sign_bits,
        sigma2=sigma_model ** 2,
        log_offset=log_offset,
        masked=view.masked.copy(),
        zeta=view.params.zeta,
        null=view.null,
    )
