import numpy as np
from src.schemas.model.models import ModelParams


class Adam:
    """Bias-corrected Adam over the trainable matrices of a ModelParams, updated in place."""

    def __init__(self, lr: float = 0.003, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        step_size = self.lr / bc1

        for name in params.trainable_names():
            if name not in grads:
                continue
            g = grads[name]
            value = params.matrices[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(value)
                self.v[name] = np.zeros_like(value)

            self.m[name] *= self.beta1
            self.m[name] += (1.0 - self.beta1) * g
            self.v[name] *= self.beta2
            self.v[name] += (1.0 - self.beta2) * (g * g)

            denom = np.sqrt(self.v[name] / bc2) + self.eps
            value -= step_size * self.m[name] / denom

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {f"adam.m.{name}": array for name, array in self.m.items()}
        arrays.update({f"adam.v.{name}": array for name, array in self.v.items()})
        return arrays

    def load_state(self, arrays: dict[str, np.ndarray], t: int) -> None:
        self.t = t
        self.m = {key.removeprefix("adam.m."): value.copy() for key, value in arrays.items() if key.startswith("adam.m.")}
        self.v = {key.removeprefix("adam.v."): value.copy() for key, value in arrays.items() if key.startswith("adam.v.")}


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: Adam, lr: float | None = None) -> Adam:
    """Apply one update; ``lr`` overrides the optimizer's rate for this step."""
    if lr is not None:
        state.lr = lr
    state.step(params, grads)
    return state
