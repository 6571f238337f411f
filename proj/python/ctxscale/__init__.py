"""Context-length scaling experiments on multitask sparse parity."""

import json

from . import _core
from ._core import *  # noqa: F401,F403
from ._core import __version__


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def parity_config(config):
    """ParityConfig from a dict or JSON text; "seed" is required."""
    return _core.ParityConfig.from_json(_text(config))


def train_model(model_spec, train_config, train_data, val_data):
    """Trains a model; specs and configs may be dicts or JSON text."""
    model, train_loss, val_loss, best_epoch = _core.train(
        _text(model_spec), _text(train_config), train_data, val_data
    )
    return {
        "model": model,
        "train_loss": train_loss,
        "val_loss": val_loss,
        "best_epoch": best_epoch,
    }


def sweep(config, jobs=1, receipt_dir=""):
    """Runs a sweep and returns the report as a dict."""
    return json.loads(_core.run_sweep(_text(config), jobs, str(receipt_dir)))
