import numpy as np

from fedcw.config import parse_config


class ScriptedRng:
    """Stands in for a Generator: backoff draws come from a list, error draws
    are always 'no error'."""

    def __init__(self, backoffs):
        self.backoffs = list(backoffs)

    def integers(self, lo, hi, size=None):
        return self.backoffs.pop(0)

    def random(self, size=None):
        return np.full(size or 1, 0.999999)


def tiny_config(**extra):
    lines = {"scenario": "static", "n_stations": 3, "traffic_rate_mbps": 5,
             "sim_time_s": 0.4, "fl_period_s": 0.2, "seed": 0}
    lines.update(extra)
    return parse_config("\n".join(f"{k} = {v}" for k, v in lines.items()))
