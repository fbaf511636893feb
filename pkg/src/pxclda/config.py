"""Flat ``key = value`` run configuration with dotted keys.

Blank lines and ``#`` comments are ignored. Values are parsed by key type;
list/object values (``system.nuclei``) use JSON syntax. Unknown keys, missing
required keys and conflicting cavity frequencies are ``ConfigError``s.
Frequencies given in eV are converted to Hartree here and nowhere else.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .cavity import BareMode, ev_to_hartree
from .compare import ScanOptions
from .fields import Direction, Grid
from .functionals import PxcParams, XcChoice
from .kohn_sham import Nucleus, SCFOptions, SystemSpec


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return text.strip().strip('"').strip("'")


def _int_list(text: str) -> list[int]:
    return [int(t) for t in _str(text).split(",") if t.strip()]


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in _str(text).split(",") if t.strip()]


# key -> (parser, default); a default of REQUIRED marks a mandatory key
REQUIRED = object()
SCHEMA = {
    "system.nuclei": (json.loads, REQUIRED),
    "system.n_electrons": (int, REQUIRED),
    "system.interactions": (_bool, None),
    "grid.half_width_bohr": (float, 8.0),
    "grid.spacing_bohr": (float, 0.25),
    "cavity.omega_ev": (float, None),
    "cavity.omega_ha": (float, None),
    "cavity.lambda": (float, 0.0),
    "cavity.polarization": (_str, "z"),
    "xc.choice": (_str, "lda_pz81"),
    "pxc.enabled": (_bool, True),
    "pxc.eta_c": (float, 1.0),
    "pxc.density_floor": (float, 1e-12),
    "scf.mixing": (_str, "linear"),
    "scf.alpha": (float, 0.3),
    "scf.max_iter": (int, 200),
    "scf.tol_density": (float, 1e-7),
    "scf.tol_eig": (float, 1e-7),
    "scf.pulay_depth": (int, 5),
    "scf.eig_tol": (float, 1e-8),
    "oracle.n_max": (int, 4),
    "oracle.eig_tol": (float, 1e-8),
    "oracle.half_width_bohr": (float, 8.0),
    "oracle.spacing_bohr": (float, 0.4),
    "oracle.fock_list": (_int_list, None),
    "oracle.krylov_dim": (int, 60),
    "scan.eta_min": (float, 0.0),
    "scan.eta_max": (float, 1.5),
    "scan.step": (float, 0.1),
    "scan.max_stages": (int, 4),
    "scan.rel_improvement": (float, 1e-3),
    "calibrate.reference": (_str, "oracle"),
    "calibrate.reference_in": (_str, None),
    "calibrate.reference_out": (_str, None),
    "calibrate.self_eta": (float, 0.3),
    "output.cuts": (_str_list, ["z"]),
    "seed": (int, 1),
}


@dataclass
class RunConfig:
    values: dict
    raw: dict
    source: Path | None = None

    def __getitem__(self, key):
        return self.values[key]

    # ---- typed views -------------------------------------------------
    @property
    def omega_ha(self) -> float:
        if self.values["cavity.omega_ha"] is not None:
            return self.values["cavity.omega_ha"]
        return ev_to_hartree(self.values["cavity.omega_ev"])

    def mode(self, lam: float | None = None) -> BareMode:
        lam = self.values["cavity.lambda"] if lam is None else lam
        return BareMode(self.omega_ha, lam, Direction.parse(self.values["cavity.polarization"]))

    def grid(self) -> Grid:
        return Grid.cube(self.values["grid.half_width_bohr"], self.values["grid.spacing_bohr"])

    def oracle_grid(self) -> Grid:
        return Grid.cube(self.values["oracle.half_width_bohr"], self.values["oracle.spacing_bohr"])

    def nuclei(self) -> tuple[Nucleus, ...]:
        return tuple(
            Nucleus((float(n["x"]), float(n["y"]), float(n["z"])), float(n["Z"]), float(n["a"]))
            for n in self.values["system.nuclei"]
        )

    def system(self, grid: Grid | None = None) -> SystemSpec:
        n_e = self.values["system.n_electrons"]
        inter = self.values["system.interactions"]
        if inter is None:
            inter = n_e > 1
        return SystemSpec(self.nuclei(), n_e, grid or self.grid(), inter)

    def pxc(self, eta: float | None = None) -> PxcParams:
        return PxcParams(self.values["pxc.eta_c"] if eta is None else eta,
                         self.values["pxc.density_floor"], self.values["pxc.enabled"])

    def xc(self) -> XcChoice:
        return XcChoice(self.values["xc.choice"])

    def scf_options(self, force: bool = False) -> SCFOptions:
        v = self.values
        return SCFOptions(v["scf.mixing"], v["scf.alpha"], v["scf.max_iter"], v["scf.tol_density"],
                          v["scf.tol_eig"], v["scf.pulay_depth"], v["scf.eig_tol"], force)

    def scan_options(self) -> ScanOptions:
        v = self.values
        return ScanOptions(v["scan.eta_min"], v["scan.eta_max"], v["scan.step"],
                           v["scan.max_stages"], v["scan.rel_improvement"])

    def resolve_path(self, key: str) -> Path:
        p = Path(self.values[key])
        if not p.is_absolute() and self.source is not None:
            p = self.source.parent / p
        return p

    def echo(self) -> list[str]:
        """``key = value`` lines for every key, as written when given, else the default."""
        lines = []
        for key in SCHEMA:
            if key in self.raw:
                lines.append(f"{key} = {self.raw[key]}")
            else:
                lines.append(f"{key} = {self.values[key]!r}  (default)")
        return lines


def parse_config(text: str, command: str | None = None, source: Path | None = None) -> RunConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    values = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except (ValueError, json.JSONDecodeError) as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r}")
        else:
            values[key] = default

    if (values["cavity.omega_ev"] is None) == (values["cavity.omega_ha"] is None):
        raise ConfigError("exactly one of 'cavity.omega_ev' and 'cavity.omega_ha' must be given")
    cfg = RunConfig(values, raw, source)
    _validate(cfg, command)
    return cfg


def _validate(cfg: RunConfig, command: str | None):
    v = cfg.values
    try:
        nuclei = cfg.nuclei()
        if not nuclei:
            raise ValueError("system.nuclei is empty")
        cfg.mode()
        cfg.pxc()
        cfg.xc()
        cfg.scf_options()
        cfg.scan_options()
        cfg.grid()
        if command in ("oracle", "calibrate"):
            cfg.oracle_grid()
        if command != "oracle":
            cfg.system()
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    if v["calibrate.reference"] not in ("oracle", "files", "self"):
        raise ConfigError("calibrate.reference must be oracle, files or self")
    if command == "calibrate" and not v["pxc.enabled"]:
        raise ConfigError("calibrate scans pxc.eta_c; pxc.enabled must be on")
    needs_one_electron = command == "oracle" or (command == "calibrate" and v["calibrate.reference"] == "oracle")
    if needs_one_electron and v["system.n_electrons"] != 1:
        raise ConfigError(
            f"the Pauli-Fierz oracle handles exactly one electron; system.n_electrons = {v['system.n_electrons']}"
        )
    if needs_one_electron and v["system.interactions"]:
        raise ConfigError("the Pauli-Fierz oracle requires system.interactions = off")
    if command == "calibrate" and v["calibrate.reference"] == "files":
        for key in ("calibrate.reference_in", "calibrate.reference_out"):
            if not v[key]:
                raise ConfigError(f"missing required key {key!r} for file references")
            if not cfg.resolve_path(key).is_file():
                raise ConfigError(f"{key}: no such file {cfg.resolve_path(key)}")


def load_config(path, command: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, command, path)
