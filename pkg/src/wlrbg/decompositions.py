from dataclasses import dataclass, field

import numpy as np

from . import numerics


@dataclass
class Decomposition:
    """Background/foreground split of a frames-as-columns matrix.

    `foreground` is what the method itself returns as its sparse or residual
    part; `foreground_thresholded` is set by methods that also emit the
    epsilon_1-cleaned foreground.
    """

    background: np.ndarray
    foreground: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)
    foreground_thresholded: np.ndarray = None
    svd_count: int = 0

    @classmethod
    def from_background(cls, a, background, method, **kwargs):
        return cls(background, a - background, method, **kwargs)

    @property
    def shape(self):
        return self.background.shape

    @property
    def best_foreground(self):
        if self.foreground_thresholded is not None:
            return self.foreground_thresholded
        return self.foreground

    def residual(self, a):
        return a - self.background - self.foreground

    def relative_residual(self, a):
        norm_a = numerics.frobenius(a)
        if norm_a == 0:
            return 0.0
        return numerics.frobenius(self.residual(a)) / norm_a

    def background_rank(self, rtol=1e-8):
        return numerics.numerical_rank(self.background, rtol=rtol)
