"""Energy measurement: hardware counters when readable, time x power otherwise.

The hardware backend reads a cumulative microjoule counter such as the Linux
powercap RAPL file ``/sys/class/powercap/intel-rapl:0/energy_uj``. The path
and proxy wattage can be set with ``HYDRANT_ENERGY_COUNTER`` and
``HYDRANT_POWER_W``.
"""

from __future__ import annotations

import os
import time
import warnings
from pathlib import Path

__all__ = ["EnergyMeter", "measure", "DEFAULT_POWER_W", "DEFAULT_COUNTER"]

DEFAULT_POWER_W = 50.0
DEFAULT_COUNTER = "/sys/class/powercap/intel-rapl:0/energy_uj"


class EnergyMeter:
    """Energy source for :func:`measure`.

    Parameters
    ----------
    backend : {"proxy", "hardware", "auto"}
        ``"auto"`` tries the hardware counter and falls back to the proxy.
        Requesting ``"hardware"`` on a machine without a readable counter
        also falls back, recording a warning in :attr:`warnings`.
    power_w : float, optional
        Constant draw used by the proxy backend.
    counter_path : str, optional
        Cumulative microjoule counter file.
    read_counter : callable, optional
        Replaces reading ``counter_path``; returns microjoules.
    max_range_uj : int, optional
        Wraparound range of the counter; read from ``max_energy_range_uj``
        next to ``counter_path`` when not given.
    """

    def __init__(self, backend="proxy", power_w=None, counter_path=None,
                 read_counter=None, max_range_uj=None):
        if backend not in ("proxy", "hardware", "auto"):
            raise ValueError(f"unknown energy backend {backend!r}")
        self.power_w = float(power_w if power_w is not None
                             else os.environ.get("HYDRANT_POWER_W", DEFAULT_POWER_W))
        if self.power_w < 0:
            raise ValueError("power must be >= 0")
        self.warnings = []
        self.backend = "proxy"
        self._read = None
        self.max_range_uj = max_range_uj
        if backend == "proxy":
            return
        if read_counter is None:
            path = Path(counter_path or os.environ.get("HYDRANT_ENERGY_COUNTER", DEFAULT_COUNTER))
            try:
                int(path.read_text())
                if self.max_range_uj is None:
                    range_file = path.with_name("max_energy_range_uj")
                    self.max_range_uj = int(range_file.read_text()) if range_file.exists() else 2**32
                read_counter = lambda: int(path.read_text())  # noqa: E731
            except (OSError, ValueError) as exc:
                msg = f"hardware energy counter unavailable ({exc}); using time x {self.power_w} W proxy"
                self.warnings.append(msg)
                if backend == "hardware":
                    warnings.warn(msg, RuntimeWarning, stacklevel=2)
                return
        self._read = read_counter
        if self.max_range_uj is None:
            self.max_range_uj = 2**32
        self.backend = "hardware"

    @property
    def resolution(self):
        return {"unit": "uJ"} if self.backend == "hardware" else {"power_w": self.power_w}

    def read_uj(self):
        return self._read()

    def delta_joules(self, start_uj, end_uj):
        delta = end_uj - start_uj
        if delta < 0:
            # counter wrapped around during the window
            delta += self.max_range_uj
        return max(delta, 0) / 1e6


def measure(meter, thunk):
    """Run ``thunk()`` and return ``(wall seconds, joules)``."""
    if meter.backend == "hardware":
        e0 = meter.read_uj()
        t0 = time.perf_counter()
        thunk()
        seconds = time.perf_counter() - t0
        return max(seconds, 0.0), meter.delta_joules(e0, meter.read_uj())
    t0 = time.perf_counter()
    thunk()
    seconds = max(time.perf_counter() - t0, 0.0)
    return seconds, seconds * meter.power_w
