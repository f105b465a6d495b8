"""Validated settings of a command-line run.
"""

from dataclasses import dataclass, field
from typing import Optional

from adapt_gmm.configuration import defaults
from adapt_gmm.cli.io import InputError
from adapt_gmm.masking.hypotheses import NullType
from adapt_gmm.masking.masking import MaskingParams, Shape, default_params
from adapt_gmm.workmodel.selection import classifier_choices, criterion_names


method_choices = ["adaptg", "bh", "storey"]
symmetric_choices = ["auto", "yes", "no"]


@dataclass(frozen=True)
class RunConfig:
    """Settings of the test command.

        Attributes:
            alpha (float): Target FDR level.
            null (NullType): Null hypothesis.
            method (str): One of method_choices.
            alpha_m (float): Override of the red region end, None for the default.
            lam (float): Override of the blue region start.
            nu (float): Override of the blue region end.
            shape (str): Override of the masking shape.
            classes (tuple): Numbers of mixture components to select from.
            classifier (str): One of classifier_choices.
            criterion (str): One of criterion_names.
            hidden (int): Hidden nodes of the network.
            symmetric (str): One of symmetric_choices.
            seed (int): Seed.
            batch (int): Reveal batch size, None for the default.
            out_dir (str): Output folder.
            trace (bool): Whether to echo every step to the log.
    """

    alpha: float = defaults.ALPHA
    null: NullType = field(default_factory=NullType.one_sided_right)
    method: str = "adaptg"
    alpha_m: Optional[float] = None
    lam: Optional[float] = None
    nu: Optional[float] = None
    shape: Optional[str] = None
    classes: tuple = defaults.CLASSES
    classifier: str = defaults.CLASSIFIER
    criterion: str = defaults.CRITERION
    hidden: int = defaults.HIDDEN_NODES
    symmetric: str = "auto"
    seed: int = defaults.SEED
    batch: Optional[int] = None
    out_dir: str = "results/test"
    trace: bool = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InputError(f"--alpha: expected a level in (0, 1) but found {self.alpha}.")
        if self.method not in method_choices:
            raise InputError(f"--method: expected one of {method_choices} but found '{self.method}'.")
        if self.classifier not in classifier_choices:
            raise InputError(f"--classifier: expected one of {classifier_choices} but found '{self.classifier}'.")
        if self.criterion not in criterion_names:
            raise InputError(f"--criterion: expected one of {criterion_names} but found '{self.criterion}'.")
        if self.symmetric not in symmetric_choices:
            raise InputError(f"--symmetric: expected one of {symmetric_choices} but found '{self.symmetric}'.")
        if not self.classes or any(k < 1 for k in self.classes):
            raise InputError(f"--classes: expected positive numbers of components but found {self.classes}.")
        if self.hidden < 1:
            raise InputError(f"--hidden: expected a positive number of nodes but found {self.hidden}.")
        if self.batch is not None and self.batch < 1:
            raise InputError(f"--batch: expected a positive batch size but found {self.batch}.")
        if self.shape is not None and self.shape not in [s.value for s in Shape]:
            raise InputError(f"--mask-shape: expected one of {[s.value for s in Shape]} but found '{self.shape}'.")

    @property
    def symmetric_flag(self) -> Optional[bool]:
        return {"auto": None, "yes": True, "no": False}[self.symmetric]

    def masking_params(self, n: int) -> MaskingParams:
        """Default masking parameters for n hypotheses with the overrides applied."""
        base = default_params(n, self.alpha, nu_override=self.nu, null=self.null)
        alpha_m = base.alpha_m if self.alpha_m is None else self.alpha_m
        if self.lam is not None and self.alpha_m is None:
            alpha_m = min(alpha_m, self.lam)
        lam = alpha_m if self.lam is None else self.lam
        shape = base.shape if self.shape is None else Shape(self.shape)
        try:
            return MaskingParams(alpha_m=alpha_m, lam=lam, nu=base.nu, shape=shape)
        except ValueError as error:
            raise InputError(f"Masking overrides: {error}")
