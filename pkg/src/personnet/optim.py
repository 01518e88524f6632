"""Parameter updates: RMSProp, plain SGD, L2 decay and the plateau schedule."""
import numpy as np

from .errors import UsageError


def _grad(params, name):
    try:
        return params.grad(name)
    except KeyError:
        raise UsageError(f"parameter {name!r} has no gradient buffer") from None


class RMSProp:
    """Divide each gradient by a running RMS of its recent values.

        ms <- 0.9 * ms + 0.1 * g**2
        w  <- w - lr * g / (sqrt(ms) + smoothing)

    The 0.9/0.1 blend is fixed. Mean squares start at zero.
    """

    decay = 0.9

    def __init__(self, learning_rate=0.05, smoothing=1e-6):
        self.learning_rate = learning_rate
        self.smoothing = smoothing
        self.mean_square = {}

    def step(self, params):
        lr = self.learning_rate
        for name, w in params.items():
            g = _grad(params, name)
            ms = self.mean_square.get(name)
            if ms is None:
                ms = self.mean_square[name] = np.zeros_like(w)
            ms *= self.decay
            ms += (1.0 - self.decay) * g * g
            w -= (lr * g / (np.sqrt(ms) + self.smoothing)).astype(w.dtype)
        params.zero_grad()
        params.mark_updated()


class SGD:
    def __init__(self, learning_rate=0.05):
        self.learning_rate = learning_rate

    def step(self, params):
        for name, w in params.items():
            w -= (self.learning_rate * _grad(params, name)).astype(w.dtype)
        params.zero_grad()
        params.mark_updated()


def rmsprop_step(params, state):
    state.step(params)


def sgd_step(params, learning_rate):
    SGD(learning_rate).step(params)


def apply_weight_decay(params, weight_decay):
    """Add ``weight_decay * w`` to the gradient of every non-bias tensor."""
    if weight_decay == 0:
        return
    for name, w in params.items():
        if name.endswith(".bias"):
            continue
        params.accumulate(name, weight_decay * w)


def make_optimizer(algorithm, learning_rate, smoothing=1e-6):
    if algorithm == "rmsprop":
        return RMSProp(learning_rate, smoothing)
    if algorithm == "sgd":
        return SGD(learning_rate)
    raise ValueError(f"unknown optimizer {algorithm!r}")


class PlateauSchedule:
    """Divide the learning rate by ``drop_factor`` once validation accuracy
    has failed to beat its best value for ``patience`` consecutive checks."""

    def __init__(self, rate, drop_factor=10.0, patience=3, min_rate=1e-6):
        if rate <= 0 or min_rate <= 0:
            raise ValueError("learning rates must be positive")
        self.rate = rate
        self.drop_factor = drop_factor
        self.patience = patience
        self.min_rate = min_rate
        self.best = -np.inf
        self.bad_checks = 0
        self.exhausted = False

    def step(self, accuracy):
        if accuracy > self.best:
            self.best = accuracy
            self.bad_checks = 0
            return self.rate
        self.bad_checks += 1
        if self.bad_checks >= self.patience:
            if self.rate <= self.min_rate:
                self.exhausted = True
            self.rate = max(self.rate / self.drop_factor, self.min_rate)
            self.bad_checks = 0
        return self.rate


def lr_schedule_step(schedule, accuracy):
    return schedule.step(accuracy)
