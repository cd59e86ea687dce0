"""Config-driven batch front end.

Usage::

    viscoctl --config run.ini --out results resolvent
    viscoctl --config run.ini simulate
    viscoctl --config run.ini control [--visco]
    viscoctl --config run.ini diagnostics

The config is an INI file whose values are JSON literals, e.g.::

    [model]
    basis = "beam"
    modes = 8
    case = "B"
    kernel = [[0.5, 1.0]]

    [time]
    T = 1.0
    n_steps = 1000

Exit codes: 0 ok, 2 config error, 3 step-size refusal, 4 degenerate Gram matrix.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .control import (
    GramDegenerate,
    annihilator_diagnostic,
    compactness_diagnostic,
    elastic_moment_functions,
    steer,
    visco_moment_functions,
)
from .dynamics import StabilityError, check_step, forward_simulate, solve_zn_all
from .kernels import MemoryKernel, damping_shift, eval_kernel, maccamy_data, resolvent, resolvent_residual
from .numgrid import BoundaryGrid, InvalidArgument, TimeGrid
from .spectral import (
    ControlCase,
    ModalBasis,
    ModalState,
    beam_hinged_basis,
    from_x_coordinates,
    psi_sequence,
    rectangle_hinged_basis,
    synthetic_basis,
)

log = logging.getLogger("viscoctl")

EXIT_OK, EXIT_CONFIG, EXIT_STABILITY, EXIT_GRAM = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


SCHEMA = {
    "model": {"basis", "modes", "case", "kernel", "rect_a", "rect_b", "boundary_nodes",
              "lambda", "psi_norms"},
    "time": {"T", "n_steps"},
    "target": {"position", "velocity", "random"},
    "simulate": {"position", "velocity", "control_csv"},
    "diagnostics": {"probe_count", "samples"},
    "run": {"seed", "out"},
}


@dataclass
class ExperimentConfig:
    basis: str = "beam"
    modes: int = 8
    case: str = "B"
    kernel: list = field(default_factory=list)
    rect_a: float = 1.0
    rect_b: float = 1.0
    boundary_nodes: int = 65
    lambdas: list | None = None
    psi_norms: list | None = None
    T: float = 1.0
    n_steps: int = 1000
    target_position: list = field(default_factory=list)
    target_velocity: list = field(default_factory=list)
    target_random: bool = False
    initial_position: list = field(default_factory=list)
    initial_velocity: list = field(default_factory=list)
    control_csv: str | None = None
    probe_count: int = 0
    samples: int = 50
    seed: int = 42
    out: str = "results"

    # -- derived objects -------------------------------------------------
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.n_steps)

    def memory(self) -> MemoryKernel:
        return MemoryKernel.from_pairs(self.kernel)

    def control_case(self) -> ControlCase:
        return ControlCase.parse(self.case)

    def modal_basis(self) -> ModalBasis:
        if self.basis == "beam":
            return beam_hinged_basis(self.modes)
        if self.basis == "rectangle":
            bg = BoundaryGrid.uniform(self.rect_a, self.boundary_nodes)
            return rectangle_hinged_basis(self.rect_a, self.rect_b, self.modes, bg)
        return synthetic_basis(self.lambdas, self.psi_norms)

    def _padded(self, values, key) -> np.ndarray:
        out = np.zeros(self.modes)
        out[: len(values)] = values
        return out

    def target(self, basis: ModalBasis) -> ModalState:
        case = self.control_case()
        if self.target_random:
            rng = np.random.default_rng(self.seed)
            x = rng.standard_normal(2 * basis.N)
            return from_x_coordinates(x / np.linalg.norm(x), basis.lambdas, case)
        return ModalState(case, self._padded(self.target_position, "position"),
                          self._padded(self.target_velocity, "velocity"))

    def initial(self) -> ModalState:
        return ModalState(self.control_case(), self._padded(self.initial_position, "position"),
                          self._padded(self.initial_velocity, "velocity"))


def _number(value, key, kind=float, minimum=None, strict=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    value = kind(value)
    if minimum is not None and (value <= minimum if strict else value < minimum):
        raise ConfigError(f"{key}: must be {'>' if strict else '>='} {minimum}, got {value!r}")
    return value


def _float_list(value, key):
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"{key}: expected a list of numbers, got {value!r}")
    return [float(v) for v in value]


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an experiment config; raises :class:`ConfigError`."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            try:
                raw[(section, key)] = json.loads(value)
            except json.JSONDecodeError:
                raise ConfigError(f"{section}.{key}: value {value!r} is not a JSON literal") from None

    cfg = ExperimentConfig()
    get = raw.get
    if ("model", "basis") in raw:
        cfg.basis = get(("model", "basis"))
        if cfg.basis not in ("beam", "rectangle", "synthetic"):
            raise ConfigError(f"model.basis: expected beam|rectangle|synthetic, got {cfg.basis!r}")
    if ("model", "case") in raw:
        try:
            cfg.case = ControlCase.parse(get(("model", "case"))).value
        except InvalidArgument as exc:
            raise ConfigError(f"model.case: {exc}") from None
    if ("model", "modes") in raw:
        cfg.modes = _number(get(("model", "modes")), "model.modes", int, 1)
    if ("model", "kernel") in raw:
        kernel = get(("model", "kernel"))
        if not isinstance(kernel, list):
            raise ConfigError(f"model.kernel: expected a list of [gamma, delta] pairs, got {kernel!r}")
        for i, term in enumerate(kernel):
            key = f"model.kernel[{i}]"
            if not isinstance(term, list) or len(term) != 2:
                raise ConfigError(f"{key}: expected a [gamma, delta] pair, got {term!r}")
            _number(term[0], key + ".gamma")
            _number(term[1], key + ".delta", minimum=0)
        cfg.kernel = [[float(g), float(d)] for g, d in kernel]
    for key, attr in (("rect_a", "rect_a"), ("rect_b", "rect_b")):
        if ("model", key) in raw:
            setattr(cfg, attr, _number(get(("model", key)), f"model.{key}", float, 0, strict=True))
    if ("model", "boundary_nodes") in raw:
        cfg.boundary_nodes = _number(get(("model", "boundary_nodes")), "model.boundary_nodes", int, 2)
    for key, attr in (("lambda", "lambdas"), ("psi_norms", "psi_norms")):
        if ("model", key) in raw:
            setattr(cfg, attr, _float_list(get(("model", key)), f"model.{key}"))
    if cfg.basis == "synthetic":
        if cfg.lambdas is None or cfg.psi_norms is None:
            raise ConfigError("model.lambda and model.psi_norms are required for a synthetic basis")
        if len(cfg.lambdas) != len(cfg.psi_norms):
            raise ConfigError("model.lambda and model.psi_norms must have equal length")
        if ("model", "modes") in raw and cfg.modes != len(cfg.lambdas):
            raise ConfigError("model.modes disagrees with the length of model.lambda")
        cfg.modes = len(cfg.lambdas)
    if ("time", "T") in raw:
        cfg.T = _number(get(("time", "T")), "time.T", float, 0, strict=True)
    if ("time", "n_steps") in raw:
        cfg.n_steps = _number(get(("time", "n_steps")), "time.n_steps", int, 2)
    for sec, prefix in (("target", "target"), ("simulate", "initial")):
        for key in ("position", "velocity"):
            if (sec, key) in raw:
                vals = _float_list(get((sec, key)), f"{sec}.{key}")
                if len(vals) > cfg.modes:
                    raise ConfigError(f"{sec}.{key}: {len(vals)} entries for {cfg.modes} modes")
                setattr(cfg, f"{prefix}_{key}", vals)
    if ("target", "random") in raw:
        flag = get(("target", "random"))
        if not isinstance(flag, bool):
            raise ConfigError(f"target.random: expected true/false, got {flag!r}")
        cfg.target_random = flag
    if ("simulate", "control_csv") in raw:
        path = get(("simulate", "control_csv"))
        if not isinstance(path, str):
            raise ConfigError(f"simulate.control_csv: expected a path string, got {path!r}")
        cfg.control_csv = path
    if ("diagnostics", "probe_count") in raw:
        cfg.probe_count = _number(get(("diagnostics", "probe_count")), "diagnostics.probe_count", int, 0)
    if ("diagnostics", "samples") in raw:
        cfg.samples = _number(get(("diagnostics", "samples")), "diagnostics.samples", int, 1)
    if ("run", "seed") in raw:
        cfg.seed = _number(get(("run", "seed")), "run.seed", int, 0)
    if ("run", "out") in raw:
        out = get(("run", "out"))
        if not isinstance(out, str):
            raise ConfigError(f"run.out: expected a path string, got {out!r}")
        cfg.out = out

    # module preconditions, checked eagerly
    try:
        cfg.grid()
        cfg.memory()
        cfg.modal_basis()
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None
    if cfg.basis == "rectangle" and cfg.control_case() is ControlCase.B:
        log.warning("hinged rectangle modes have zero case-B trace; every mode is invisible")
    return cfg


# -- output ---------------------------------------------------------------

def write_csv(path: Path, columns: list[str], data) -> None:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(columns), comments="")


def write_pairs(path: Path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("field,value\n")
        for name, value in rows:
            fh.write(f"{name},{float(value):.17g}\n")


def write_manifest(out: Path, command: str, cfg: ExperimentConfig, extra=None) -> None:
    doc = {"toolkit": "viscoctl", "version": __version__, "command": command, "config": asdict(cfg)}
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_control_csv(path: str, grid: TimeGrid, n_boundary: int) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"simulate.control_csv: {exc}") from None
    if data.shape != (grid.size, n_boundary + 1):
        raise ConfigError(
            f"simulate.control_csv: expected {grid.size} rows and {n_boundary + 1} columns, got {data.shape}"
        )
    if not np.allclose(data[:, 0], grid.nodes, rtol=0, atol=1e-12 * max(1.0, grid.T)):
        raise ConfigError("simulate.control_csv: time column does not match the configured grid")
    return data[:, 1:]


# -- commands ---------------------------------------------------------------

def cmd_resolvent(cfg: ExperimentConfig, out: Path) -> int:
    grid, M = cfg.grid(), cfg.memory()
    rk = resolvent(M, grid)
    m0, _, _ = eval_kernel(M, grid)
    res = resolvent_residual(M, rk)
    write_csv(out / "resolvent.csv", ["t", "M", "R", "R'", "R''", "residual"],
              np.column_stack([grid.nodes, m0, rk.R, rk.dR, rk.d2R, res]))
    mc = maccamy_data(rk)
    write_manifest(out, "resolvent", cfg, {"a": mc.a, "b": mc.b, "K0": float(mc.K[0]),
                                           "max_residual": float(np.abs(res).max())})
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    grid, M, basis = cfg.grid(), cfg.memory(), cfg.modal_basis()
    if cfg.control_csv:
        g = read_control_csv(cfg.control_csv, grid, basis.bg.size)
    else:
        g = np.zeros((grid.size, basis.bg.size))
    traj = forward_simulate(basis, M, cfg.control_case(), g, cfg.initial(), grid)
    cols, data = traj.table()
    write_csv(out / "trajectory.csv", cols, data)
    write_manifest(out, "simulate", cfg)
    return EXIT_OK


def cmd_control(cfg: ExperimentConfig, out: Path, visco: bool) -> int:
    grid, basis = cfg.grid(), cfg.modal_basis()
    M = cfg.memory() if visco else MemoryKernel()
    check_step(basis.lambdas.max(), grid)
    target = cfg.target(basis)
    result = steer(basis, cfg.control_case(), target, grid, M, visco=visco)
    g = result.control.values
    write_csv(out / "control.csv", ["t"] + [f"g_{j + 1}" for j in range(g.shape[1])],
              np.column_stack([grid.nodes, g]))
    write_pairs(out / "report.csv", result.report.rows())
    N2 = result.moments.gram.shape[0]
    write_csv(out / "gram.csv", [f"c{k + 1}" for k in range(N2)], result.moments.gram)
    write_manifest(out, "control --visco" if visco else "control", cfg,
                   {"residual_rel": result.report.residual_rel})
    return EXIT_OK


def cmd_diagnostics(cfg: ExperimentConfig, out: Path) -> int:
    grid, M, basis = cfg.grid(), cfg.memory(), cfg.modal_basis()
    case = cfg.control_case()
    check_step(basis.lambdas.max(), grid)
    psi = psi_sequence(basis, case)
    write_csv(out / "psi_norms.csv", ["n", "lambda", "psi_norm"],
              np.column_stack([np.arange(1, basis.N + 1), basis.lambdas, psi.norms]))

    ms_e = elastic_moment_functions(basis, case, psi, grid)
    mc = damping_shift(maccamy_data(resolvent(M, grid)), grid).data
    zset = solve_zn_all(mc, basis.lambdas, grid)
    ms_v = visco_moment_functions(basis, case, psi, zset, grid)
    eig_e = np.linalg.eigvalsh(ms_e.gram)
    eig_v = np.linalg.eigvalsh(ms_v.gram)
    write_csv(out / "gram_eigs.csv", ["k", "elastic", "visco"],
              np.column_stack([np.arange(1, eig_e.size + 1), eig_e, eig_v]))

    sv = compactness_diagnostic(basis, M, case, grid, probe_count=cfg.probe_count, seed=cfg.seed)
    write_csv(out / "svd.csv", ["k", "sigma"], np.column_stack([np.arange(1, sv.size + 1), sv]))

    ann = annihilator_diagnostic(ms_v)
    rows = [("min_eig", ann.min_eig), ("threshold", ann.threshold),
            ("witness_found", 1.0 if ann.witness is not None else 0.0)]
    if ann.witness is not None:
        for n in range(basis.N):
            rows += [(f"xi_{n + 1}", ann.witness.w[n]), (f"eta_{n + 1}", ann.witness.wp[n])]
    write_pairs(out / "annihilator.csv", rows)
    write_manifest(out, "diagnostics", cfg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="viscoctl", description=__doc__.split("\n")[0])
    parser.add_argument("--config", required=True, help="experiment config (INI with JSON values)")
    parser.add_argument("--out", help="output directory (overrides run.out)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("resolvent", help="resolvent kernel and MacCamy constants")
    sub.add_parser("simulate", help="forward simulation of the modal system")
    p = sub.add_parser("control", help="moment-method control synthesis with verification")
    p.add_argument("--visco", action="store_true", help="use the configured memory kernel")
    sub.add_parser("diagnostics", help="Psi norms, Gram spectra, compactness and annihilators")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        cfg.out = args.out
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default" if args.verbose else "ignore", RuntimeWarning)
            if args.command == "resolvent":
                return cmd_resolvent(cfg, out)
            if args.command == "simulate":
                return cmd_simulate(cfg, out)
            if args.command == "control":
                return cmd_control(cfg, out, args.visco)
            return cmd_diagnostics(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityError as exc:
        print(f"stability refusal: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except GramDegenerate as exc:
        print(f"gram degenerate: min eigenvalue {exc.min_eig:.17g}", file=sys.stderr)
        return EXIT_GRAM


if __name__ == "__main__":
    sys.exit(main())
