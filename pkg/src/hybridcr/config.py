"""System-level scalar parameters of the cognitive radio uplink."""

from __future__ import annotations

from dataclasses import dataclass, replace


def from_db(x_db: float) -> float:
    """Convert a dB quantity to linear scale."""
    return 10.0 ** (x_db / 10.0)


def to_db(x: float) -> float:
    """Convert a linear quantity to dB."""
    import math

    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters shared by all analytical and Monte Carlo paths.

    All powers, noise levels and variances are linear (not dB). ``T`` is the
    MAC frame length in seconds and ``f_s`` the sensing sampling frequency in
    Hz, so a sensing slot of ``tau`` seconds yields ``tau * f_s`` samples.
    """

    M: int = 4                  # receive antennas at each RX
    T: float = 0.1              # MAC frame length [s]
    f_s: float = 6e6            # sensing sampling frequency [Hz]
    N00: float = 1.0            # noise power in the sensing receiver
    N0p: float = 1.0            # noise power at the primary RX
    N0s: float = 1.0            # noise power at the secondary RX
    P_p: float = 10.0           # primary transmit power
    P_peak: float = 10.0        # secondary peak transmit power
    sigma0_sq: float = from_db(-3.0)   # variance of the TXp-TXs sensing channel
    gamma0: float = from_db(3.0)       # primary SINR outage threshold
    P1_prior: float = 0.3       # prior probability the primary is active
    Pout_target: float = 2e-2   # primary outage budget
    Pd_target: float = 0.975    # targeted average detection probability

    def __post_init__(self) -> None:
        positive = {
            "T": self.T, "f_s": self.f_s, "N00": self.N00, "N0p": self.N0p,
            "N0s": self.N0s, "P_p": self.P_p, "P_peak": self.P_peak,
            "sigma0_sq": self.sigma0_sq, "gamma0": self.gamma0,
        }
        for name, value in positive.items():
            if not value > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if not 0.0 <= self.P1_prior <= 1.0:
            raise ValueError(f"P1_prior must lie in [0, 1], got {self.P1_prior}")
        if not 0.0 < self.Pout_target < 1.0:
            raise ValueError(f"Pout_target must lie in (0, 1), got {self.Pout_target}")
        if not 0.0 < self.Pd_target < 1.0:
            raise ValueError(f"Pd_target must lie in (0, 1), got {self.Pd_target}")

    @property
    def P0_prior(self) -> float:
        """Prior probability that the primary is idle."""
        return 1.0 - self.P1_prior

    @property
    def rho_snr_p(self) -> float:
        """Primary-link SNR P_p / N0p."""
        return self.P_p / self.N0p

    @property
    def rho_inr_s(self) -> float:
        """Interference-to-noise ratio P_p / N0s seen by the secondary RX."""
        return self.P_p / self.N0s

    def with_overrides(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)


def default_config(**overrides) -> SystemConfig:
    """Baseline simulation parameters; keyword overrides replace fields."""
    return SystemConfig(**overrides) if overrides else SystemConfig()
