"""Sectioned key=value run configuration.

Plain INI text (configparser syntax, no interpolation) with a closed key
set per section: unknown sections or keys are rejected so that typos
fail loudly instead of silently falling back to defaults. Values stay
strings here; accessors coerce and report the offending section.key on
failure. config_hash fingerprints the parsed content (not the file
bytes), so formatting-only edits do not change output identity.
"""

from __future__ import annotations

import configparser
import hashlib
import io

# section -> allowed keys; None marks required-when-section-used keys at
# the subcommand level, so here everything is just membership
SCHEMA = {
    "spectral": {"d", "omega", "rho2", "r_min", "r_max", "amp", "quad_nodes"},
    "kernel": {"t_cut", "r_max", "n_r", "t_max", "n_t"},
    "lattice": {"eps", "n", "kappa", "d"},  # d only read by free models
    "sampler": {
        "seed", "n_chains", "n_sweeps", "burn_in", "thin", "p_site",
        "p_bridge", "sigma_site", "block_len", "autotune", "n_threads",
    },
    "estimators": {
        "gamma", "window_lo", "window_hi", "n_batches", "lambda",
        "n_vectors", "path_stride",
    },
    "modes": {"n_sets", "n_modes", "n_steps", "n_samples", "seed", "t_step"},
    "kv": {"chain_file", "t_final", "n_traj", "seed"},
    "output": {"dir"},
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    """Malformed, unknown, or missing configuration content."""


class RunConfig:
    """Validated view of one config file."""

    def __init__(self, sections: dict):
        self.sections = sections

    @classmethod
    def from_string(cls, text, origin="<string>") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text, source=origin)
        except configparser.Error as exc:
            raise ConfigError(f"{origin}: {exc}") from exc
        sections = {}
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"{origin}: unknown section [{sec}]")
            body = {}
            for key, val in cp.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"{origin}: unknown key {sec}.{key}")
                body[key] = val.strip()
            sections[sec] = body
        return cls(sections)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_string(text, origin=str(path))

    def has(self, section, key=None) -> bool:
        if key is None:
            return section in self.sections
        return key in self.sections.get(section, {})

    def _raw(self, section, key):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"missing required key {section}.{key}") from None

    def get_str(self, section, key, default=None) -> str:
        if default is not None and not self.has(section, key):
            return default
        return self._raw(section, key)

    def _coerce(self, section, key, conv, default, kind):
        if default is not None and not self.has(section, key):
            return default
        raw = self._raw(section, key)
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key}: expected {kind}, got {raw!r}") from None

    def get_int(self, section, key, default=None) -> int:
        return self._coerce(section, key, lambda s: int(s, 0), default, "an integer")

    def get_float(self, section, key, default=None) -> float:
        return self._coerce(section, key, float, default, "a number")

    def get_bool(self, section, key, default=None) -> bool:
        def conv(s):
            low = s.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(low)

        return self._coerce(section, key, conv, default, "a boolean")

    def get_floats(self, section, key, default=None) -> tuple:
        """Comma-separated float list."""
        conv = lambda s: tuple(float(p) for p in s.split(","))
        return self._coerce(section, key, conv, default, "comma-separated numbers")

    def require(self, section, *keys):
        if section not in self.sections:
            raise ConfigError(f"missing required section [{section}]")
        for key in keys:
            if key not in self.sections[section]:
                raise ConfigError(f"missing required key {section}.{key}")

    def canonical(self) -> str:
        """Sorted normalized rendering used for hashing and provenance."""
        out = io.StringIO()
        for sec in sorted(self.sections):
            out.write(f"[{sec}]\n")
            for key in sorted(self.sections[sec]):
                out.write(f"{key}={self.sections[sec][key]}\n")
        return out.getvalue()

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]
