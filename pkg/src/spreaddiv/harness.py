"""Experiment specs, their text format, and the runners behind the CLI.

Config format
-------------
Plain ``key = value`` lines grouped under ``[section]`` headers::

    [experiment]
    subcommand = ica
    name = ica-small
    seed = 3
    output = runs/ica-small

    [ica]
    iterations = 50
    gamma = 0.1

``[experiment]`` takes ``subcommand`` (required), ``name`` (defaults to
the subcommand), ``seed`` (defaults to ``$SPREADDIV_SEED`` or 0) and
``output`` (defaults to ``runs/<name>``).  The second section is named
after the subcommand (``[canned]`` for the ``experiment`` subcommand,
whose own name is taken by the header section) and may set any
parameter from :data:`SCHEMAS`;
unset parameters take the defaults listed there.  A ``[run]`` section
(written into meta.txt) is informational and ignored.  Unknown sections or
keys, duplicate keys and values of the wrong type are errors that name
the key and its line.

Every run writes ``results.csv`` and ``meta.txt`` (the full config, seed
and package version) into the output directory.  Numbers are written
with 17 significant digits and '.' as the decimal separator.
"""

import configparser
import csv
from dataclasses import dataclass, field
import io
import math
import os
from pathlib import Path
import re

import numpy as np

from . import __version__
from .divergences import (dpi_check, f_divergence, gaussian_spread_kl, is_undefined,
                          optimize_noise_direction, spread_f_divergence_discrete,
                          subspace_spread_kl, SubspacePair)
from .dvae import (DVaeModel, FixedGaussianSpread, FixedLaplaceSpread, LowRankSpread,
                   MeanTransformSpread, Toy2dSpec, TrainConfig, parse_schedule,
                   toy2d_experiment, train_dvae)
from .errors import ValidationError
from .ica import IcaEmConfig, generate_ica_data, random_mixing, run_spread_em
from .kernels import StationaryKernel, check_stationary_validity
from .numerics import make_rng
from .pca import (classical_pca, fit_spread_pca, principal_angles,
                  spread_bounded_likelihood_demo)

SEED_ENV = "SPREADDIV_SEED"


class ConfigError(ValidationError):
    """A config text could not be parsed into an :class:`ExperimentSpec`."""

    def __init__(self, message, key=None, line=None):
        where = ""
        if key is not None:
            where += f" (key '{key}'"
            where += f", line {line})" if line is not None else ")"
        super().__init__(message + where)
        self.key, self.line = key, line


# -- typed parameters ---------------------------------------------------------

def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_float_or_auto(text):
    t = text.strip()
    return "auto" if t == "auto" else float(t)


PARSERS = {
    "int": int,
    "float": float,
    "str": str.strip,
    "bool": _parse_bool,
    "floats": _parse_floats,
    "ints": _parse_ints,
    "float|auto": _parse_float_or_auto,
}


def format_value(value):
    """Lossless text form of a parameter value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Param:
    name: str
    kind: str
    default: object
    help: str = ""
    choices: tuple = None
    aliases: tuple = ()

    def parse(self, text):
        value = PARSERS[self.kind](text)
        if self.kind == "float" and not math.isfinite(value):
            raise ValueError("must be finite")
        self.check(value)
        return value

    def check(self, value):
        if self.choices is not None and value not in self.choices:
            raise ValueError(f"must be one of {', '.join(self.choices)}")


SCHEMAS = {
    "check-kernel": [
        Param("family", "str", "gaussian", "kernel family", ("gaussian", "laplace")),
        Param("scale", "float", 1.0, "sigma (Gaussian) or b (Laplace)"),
        Param("omega_max", "float", 10.0, "largest frequency tabulated"),
        Param("n_omega", "int", 101, "number of frequencies in [0, omega_max]"),
    ],
    "divergence": [
        Param("kind", "str", "kl", "divergence", ("kl", "tv")),
        Param("p", "floats", (0.5, 0.5, 0.0), "first distribution"),
        Param("q", "floats", (0.0, 0.5, 0.5), "second distribution"),
        Param("noise", "float", 0.1,
              "spread P = (1 - noise) I + noise / n on every entry"),
        Param("spread_file", "str", "", "CSV file holding P (overrides noise)"),
    ],
    "subspace-noise": [
        Param("x_dim", "int", 3, "ambient dimension"),
        Param("z_dim", "int", 1, "subspace dimension"),
        Param("sigma2", "float", 0.5, "isotropic noise variance"),
        Param("steps", "int", 2000, "projected ascent steps"),
        Param("lr", "float", 0.05, "ascent step size"),
    ],
    "ica": [
        Param("x_dim", "int", 10, "observed dimension"),
        Param("z_dim", "int", 5, "number of sources"),
        Param("n", "int", 2000, "datapoints"),
        Param("gamma", "float", 0.0, "observation noise std"),
        Param("iterations", "int", 100, "EM updates", aliases=("--iters",)),
        Param("s_y", "int", 1, "spread samples per datapoint", aliases=("--sy",)),
        Param("s_z", "int", 1000, "importance samples", aliases=("--sz",)),
        Param("sigma", "float|auto", "auto", "spread noise std or 'auto'"),
        Param("algo", "str", "both", "which EM to run", ("spread", "standard", "both")),
    ],
    "pca": [
        Param("input", "str", "", "CSV data file (synthetic data when empty)"),
        Param("x_dim", "int", 5, "observed dimension of synthetic data"),
        Param("z_dim", "int", 2, "latent dimension"),
        Param("n", "int", 500, "synthetic datapoints"),
        Param("sigma2", "float", 1.0, "spread noise variance"),
        Param("demo_j1", "bool", False, "run the bounded spread likelihood demo instead"),
    ],
    "dvae": [
        Param("spread", "str", "gaussian", "spread family",
              ("gaussian", "laplace", "lowrank", "meantransform")),
        Param("sigma", "float", 0.5, "Gaussian spread std (base std for meantransform)"),
        Param("b", "float", 0.5, "Laplace spread scale"),
        Param("rank", "int", 1, "low-rank spread rank"),
        Param("lipschitz_c", "float", 0.9, "spectral norm cap for meantransform"),
        Param("schedule", "str", "1:1", "model steps : spread steps"),
        Param("epochs", "int", 100, "training epochs"),
        Param("dataset", "str", "builtin:linear", "builtin:linear, builtin:line3d or a CSV path"),
        Param("n", "int", 500, "size of builtin datasets"),
        Param("z_dim", "int", 1, "latent dimension"),
        Param("hidden", "ints", (), "hidden layer widths (empty for linear maps)"),
        Param("lr_model", "float", 0.01, "model learning rate"),
        Param("lr_spread", "float", 0.001, "spread learning rate"),
        Param("batch_size", "int", 50, "minibatch size"),
        Param("eps_samples", "int", 4, "noise draws per datapoint"),
        Param("optimizer", "str", "sgd", "optimizer", ("sgd", "adam")),
        Param("variance_reduced", "bool", False, "use the variance-reduced bound form"),
    ],
    "toy2d": [
        Param("mode", "str", "spread", "training mode", ("plain", "fixed", "spread")),
        Param("sigma_f", "float", 0.3, "spread / fixed noise std"),
        Param("n", "int", 2000, "datapoints"),
        Param("steps", "int", 2000, "full-batch steps"),
    ],
    "experiment": [
        Param("which", "str", "fig2c", "canned experiment",
              ("fig2c", "fig4a", "fig4b", "subspace", "toy2d", "j1-demo")),
        Param("iterations", "int", 100, "EM updates for fig4a / fig4b"),
        Param("instances", "int", 10, "random instances for subspace"),
    ],
}

SUBCOMMANDS = tuple(SCHEMAS)

HEADERS = {
    "check-kernel": ("omega", "fourier_transform"),
    "divergence": ("kind", "original", "spread", "injective", "support_complete"),
    "subspace-noise": ("step", "spread_kl", "abs_dot"),
    "ica": ("iter", "algo", "rel_error"),
    "pca": ("component", "eigenvalue", "classical_eigenvalue", "principal_angle"),
    "dvae": ("epoch", "neg_bound"),
    "toy2d": ("record", "neg_loglik"),
    "fig2c": ("mu_q", "spread_kl"),
    "fig4a": ("gamma", "algo", "rel_error"),
    "fig4b": ("n", "algo", "rel_error"),
    "subspace": ("instance", "abs_dot", "kl_initial", "kl_final"),
    "toy2d-modes": ("mode", "diverged", "mean0_axis1", "mean1_axis1",
                    "var0_axis2", "var1_axis2"),
    "j1-demo": ("sigma_f2", "mu_hat", "sigma2_hat", "loglik_per_sample"),
}
PARAMS_HEADER = ("tensor", "index", "value")
# subcommands whose main output is a key=value report rather than the CSV
REPORT_SUBCOMMANDS = ("check-kernel", "divergence", "toy2d")


def matrix_csv(M, prefix="col"):
    M = np.atleast_2d(M)
    return tuple(f"{prefix}{j}" for j in range(M.shape[1])), [tuple(map(float, r)) for r in M]


def schema(subcommand):
    if subcommand not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; expected one of "
                          f"{', '.join(SUBCOMMANDS)}")
    return {p.name: p for p in SCHEMAS[subcommand]}


def default_seed():
    text = os.environ.get(SEED_ENV)
    if text is None or not text.strip():
        return 0
    try:
        seed = int(text)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {text!r}") from None
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be non-negative")
    return seed


@dataclass
class ExperimentSpec:
    subcommand: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    name: str = ""
    output: str = ""

    def __post_init__(self):
        sch = schema(self.subcommand)
        unknown = set(self.params) - set(sch)
        if unknown:
            raise ConfigError(f"unknown parameter(s) for {self.subcommand}: "
                              f"{', '.join(sorted(unknown))}")
        full = {}
        for name, p in sch.items():
            value = self.params.get(name, p.default)
            if isinstance(value, list):
                value = tuple(value)
            try:
                p.check(value)
            except ValueError as exc:
                raise ConfigError(str(exc), name) from None
            full[name] = value
        self.params = full
        if not self.name:
            self.name = self.subcommand
        if not self.output:
            self.output = str(Path("runs") / self.name)
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative", "seed")
        self.seed = int(self.seed)


EXPERIMENT_KEYS = ("subcommand", "name", "seed", "output")


def section_name(subcommand):
    """Config section holding the parameters of ``subcommand``."""
    return "canned" if subcommand == "experiment" else subcommand


def _line_index(text):
    """Map (section, key) and section headers to 1-based line numbers."""
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
        where.setdefault((section, key), no)
    return where


# informational section appended by meta.txt; ignored on parse so that a
# run's meta.txt can be replayed as a config
META_SECTION = "run"


def parse_config(text):
    """Parse the config text format into an :class:`ExperimentSpec`."""
    cp = configparser.ConfigParser(strict=True, interpolation=None,
                                   delimiters=("=",), comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key in section [{exc.section}]", exc.option, exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", None, exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    lines = _line_index(text)
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section", "subcommand")
    exp = cp["experiment"]
    for key in exp:
        if key not in EXPERIMENT_KEYS:
            raise ConfigError("unknown key in [experiment]", key, lines.get(("experiment", key)))
    if "subcommand" not in exp:
        raise ConfigError("missing required key", "subcommand", lines.get(("experiment", None)))
    sub = exp["subcommand"].strip()
    if sub not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {sub!r}", "subcommand",
                          lines.get(("experiment", "subcommand")))
    sec = section_name(sub)
    for section in cp.sections():
        if section not in ("experiment", sec, META_SECTION):
            raise ConfigError(f"unknown section [{section}]", None, lines.get((section, None)))
    seed = default_seed()
    if "seed" in exp:
        try:
            seed = int(exp["seed"])
        except ValueError:
            raise ConfigError(f"expected an integer, got {exp['seed']!r}", "seed",
                              lines.get(("experiment", "seed"))) from None
    sch = schema(sub)
    params = {}
    if sec in cp:
        for key, raw in cp[sec].items():
            line = lines.get((sec, key))
            if key not in sch:
                raise ConfigError(f"unknown key in [{sec}]", key, line)
            try:
                params[key] = sch[key].parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad {sch[key].kind} value {raw!r}: {exc}", key, line) from None
    return ExperimentSpec(sub, params, seed, exp.get("name", "").strip(),
                          exp.get("output", "").strip())


def serialize_config(spec):
    """Text form of ``spec``; ``parse_config`` inverts it exactly."""
    out = ["[experiment]",
           f"subcommand = {spec.subcommand}",
           f"name = {spec.name}",
           f"seed = {spec.seed}",
           f"output = {spec.output}",
           "",
           f"[{section_name(spec.subcommand)}]"]
    for p in SCHEMAS[spec.subcommand]:
        out.append(f"{p.name} = {format_value(spec.params[p.name])}")
    return "\n".join(out) + "\n"


# -- results ------------------------------------------------------------------

@dataclass
class RunResult:
    header: tuple
    rows: list
    summary: list = field(default_factory=list)     # key=value lines
    extra_csv: dict = field(default_factory=dict)    # file name -> (header, rows)


def format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if is_undefined(v):
        return "undefined"
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValidationError("row length does not match the CSV header")
        w.writerow([format_cell(v) for v in row])
    return buf.getvalue()


# -- runners ------------------------------------------------------------------

def _run_check_kernel(p, seed):
    k = StationaryKernel(p["family"], p["scale"])
    if p["n_omega"] < 2 or not p["omega_max"] > 0:
        raise ValidationError("need n_omega >= 2 and omega_max > 0")
    omegas = np.linspace(0.0, p["omega_max"], p["n_omega"])
    report = check_stationary_validity(k, omegas)
    rows = [(float(w), float(f)) for w, f in zip(omegas, k.fourier(omegas))]
    return RunResult(HEADERS["check-kernel"], rows, report.as_lines())


def _run_divergence(p, seed):
    pv, qv = np.asarray(p["p"]), np.asarray(p["q"])
    n = pv.size
    if p["spread_file"]:
        P = load_dataset(p["spread_file"], 0, seed)
    else:
        if not 0.0 <= p["noise"] <= 1.0:
            raise ValidationError("noise must lie in [0, 1]")
        P = (1.0 - p["noise"]) * np.eye(n) + p["noise"] / n
    res = spread_f_divergence_discrete(p["kind"], pv, qv, P)
    orig = f_divergence(p["kind"], pv, qv)
    row = (p["kind"], orig, res.value, res.injective, res.support_complete)
    summary = [f"original={format_cell(orig)}", f"spread={format_cell(res.value)}",
               f"dpi_holds={format_cell(dpi_check(p['kind'], pv, qv, P).holds)}"]
    return RunResult(HEADERS["divergence"], [row], summary)


def random_subspace_pair(x_dim, z_dim, sigma2, rng):
    rng = make_rng(rng)
    A = rng.standard_normal((x_dim, z_dim))
    u = rng.standard_normal(x_dim)
    return SubspacePair(rng.standard_normal(x_dim), rng.standard_normal(x_dim), A, A,
                        sigma2, u / np.linalg.norm(u))


def _run_subspace_noise(p, seed):
    s = random_subspace_pair(p["x_dim"], p["z_dim"], p["sigma2"], seed)
    res = optimize_noise_direction(s, steps=p["steps"], lr=p["lr"], seed=seed)
    rows = [(int(k), float(kl), float(d)) for k, kl, d in res.trace]
    return RunResult(HEADERS["subspace-noise"], rows,
                     [f"abs_dot={format_cell(res.dot)}", f"steps={res.steps}"])


def _ica_errors(data, z_dim, cfg, algos):
    return {algo: _Trace(run_spread_em(data, z_dim, cfg, algo=algo)) for algo in algos}


class _Trace(list):
    """Error trace that also carries the final estimate."""

    def __init__(self, result):
        super().__init__(result.error_trace)
        self.A_est = result.A_est


def _run_ica(p, seed):
    rng = make_rng(seed)
    A = random_mixing(p["x_dim"], p["z_dim"], rng)
    data = generate_ica_data(A, p["n"], p["gamma"], rng)
    cfg = IcaEmConfig(sigma=p["sigma"], s_y=p["s_y"], s_z=p["s_z"],
                      iterations=p["iterations"], seed=seed, gamma=p["gamma"])
    algos = ("spread", "standard") if p["algo"] == "both" else (p["algo"],)
    traces = _ica_errors(data, p["z_dim"], cfg, algos)
    rows = [(k, algo, err) for algo in algos for k, err in enumerate(traces[algo])]
    summary = [f"final_{algo}={format_cell(traces[algo][-1])}" for algo in algos]
    extra = {f"A_est_{algo}.csv": matrix_csv(traces[algo].A_est) for algo in algos}
    extra["A_true.csv"] = matrix_csv(A)
    return RunResult(HEADERS["ica"], rows, summary, extra)


def _run_pca(p, seed):
    if p["demo_j1"]:
        return canned_j1(p, seed)
    rng = make_rng(seed)
    if p["input"]:
        x = load_dataset(p["input"], 0, seed)
    else:
        F = rng.standard_normal((p["x_dim"], p["z_dim"]))
        x = rng.standard_normal((p["n"], p["z_dim"])) @ F.T \
            + 0.1 * rng.standard_normal((p["n"], p["x_dim"]))
    model = fit_spread_pca(x, p["z_dim"], p["sigma2"])
    ref = classical_pca(x, p["z_dim"])
    ref_lam = np.sum(ref * ref, axis=0)
    rows = []
    for k in range(p["z_dim"]):
        angle = float(principal_angles(model.F[:, k:k + 1], ref[:, k:k + 1])[0])
        rows.append((k, float(model.eigenvalues[k]), float(ref_lam[k]), angle))
    return RunResult(HEADERS["pca"], rows, extra_csv={"F.csv": matrix_csv(model.F)})


def load_dataset(name, n, seed):
    """Builtin toy datasets or a numeric CSV file (one datapoint per row)."""
    rng = make_rng(seed)
    if name == "builtin:linear":
        return 2.0 * rng.standard_normal((n, 1))
    if name == "builtin:line3d":
        return rng.standard_normal((n, 1)) @ np.array([[1.0, 2.0, -1.0]])
    if name.startswith("builtin:"):
        raise ValidationError(f"unknown builtin dataset {name!r}")
    path = Path(name)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read dataset {name!r}: {exc}") from None
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        float(rows[0].split(",")[0])
    except (ValueError, IndexError):
        rows = rows[1:]
    try:
        x = np.array([[float(v) for v in ln.split(",")] for ln in rows], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"dataset {name!r} is not numeric CSV: {exc}") from None
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValidationError(f"dataset {name!r} has no rows")
    return x


def build_spread(p, x_dim, seed):
    kind = p["spread"]
    if kind == "gaussian":
        return FixedGaussianSpread(p["sigma"])
    if kind == "laplace":
        return FixedLaplaceSpread(p["b"])
    if kind == "lowrank":
        return LowRankSpread.init(x_dim, p["rank"], p["sigma"] ** 2, rng=seed)
    return MeanTransformSpread.init(x_dim, p["sigma"], c=p["lipschitz_c"], rng=seed)


def _run_dvae(p, seed):
    x = load_dataset(p["dataset"], p["n"], seed)
    m, s = parse_schedule(p["schedule"])
    model = DVaeModel.build(x.shape[1], p["z_dim"], build_spread(p, x.shape[1], seed),
                            hidden=p["hidden"], seed=seed)
    cfg = TrainConfig(lr_model=p["lr_model"], lr_spread=p["lr_spread"],
                      batch_size=p["batch_size"], epochs=p["epochs"], model_steps=m,
                      spread_steps=s, eps_samples=p["eps_samples"], seed=seed,
                      optimizer=p["optimizer"], variance_reduced=p["variance_reduced"])
    res = train_dvae(x, model, cfg)
    rows = [(e, v) for e, v in res.trace]
    summary = [f"final_neg_bound={format_cell(res.trace[-1][1])}", f"steps={res.steps}"]
    if res.spectral_norms:
        summary.append(f"max_spectral_norm={format_cell(max(res.spectral_norms))}")
    return RunResult(HEADERS["dvae"], rows, summary,
                     {"params.csv": (PARAMS_HEADER, list(model.param_rows()))})


def _run_toy2d(p, seed):
    res = toy2d_experiment(Toy2dSpec(n=p["n"], seed=seed), p["mode"],
                           sigma_f=p["sigma_f"], steps=p["steps"])
    rows = list(enumerate(res.loss_trace))
    return RunResult(HEADERS["toy2d"], rows, res.as_lines())


# -- canned experiments -------------------------------------------------------

FIG4A_GAMMAS = (0.0, 0.05, 0.1, 0.2, 0.4)
FIG4B_SIZES = (500, 1000, 2000)


def canned_fig2c(p, seed):
    grid = np.round(np.linspace(-3.0, 3.0, 25), 12)
    rows = [(float(m), gaussian_spread_kl(0.0, m, 0.5)) for m in grid]
    best = min(rows, key=lambda r: r[1])
    return RunResult(HEADERS["fig2c"], rows, [f"argmin_mu_q={format_cell(best[0])}"])


def canned_fig4a(p, seed):
    rng = make_rng(seed)
    A = random_mixing(10, 5, rng)
    rows = []
    for gamma in FIG4A_GAMMAS:
        data = generate_ica_data(A, 2000, gamma, rng)
        cfg = IcaEmConfig(iterations=p["iterations"], seed=seed, gamma=gamma)
        for algo, trace in _ica_errors(data, 5, cfg, ("spread", "standard")).items():
            rows.append((gamma, algo, trace[-1]))
    return RunResult(HEADERS["fig4a"], rows)


def canned_fig4b(p, seed):
    rng = make_rng(seed)
    A = random_mixing(10, 5, rng)
    rows = []
    for n in FIG4B_SIZES:
        data = generate_ica_data(A, n, 0.0, rng)
        cfg = IcaEmConfig(iterations=p["iterations"], seed=seed)
        for algo, trace in _ica_errors(data, 5, cfg, ("spread", "standard")).items():
            rows.append((n, algo, trace[-1]))
    return RunResult(HEADERS["fig4b"], rows)


def canned_subspace(p, seed):
    rng = make_rng(seed)
    rows = []
    for i in range(p["instances"]):
        s = random_subspace_pair(int(rng.integers(2, 6)), 1, 0.5, rng)
        kl0 = subspace_spread_kl(s)
        res = optimize_noise_direction(s, seed=int(rng.integers(2 ** 31)))
        rows.append((i, res.dot, kl0, subspace_spread_kl(s.with_u(res.u))))
    return RunResult(HEADERS["subspace"], rows)


def canned_toy2d(p, seed):
    rows = []
    for mode in ("plain", "fixed", "spread"):
        r = toy2d_experiment(Toy2dSpec(seed=seed), mode)
        rows.append((mode, r.diverged, r.means[0, 0], r.means[1, 0],
                     r.variances[0, 1], r.variances[1, 1]))
    return RunResult(HEADERS["toy2d-modes"], rows)


def canned_j1(p, seed):
    rows = []
    for s2 in (0.01, 0.1, 0.5, 1.0):
        out = spread_bounded_likelihood_demo(0.0, s2, 1000, seed=seed)
        rows.append((s2, out["mu_hat"], out["sigma2_hat"], out["loglik_per_sample"]))
    return RunResult(HEADERS["j1-demo"], rows)


CANNED = {
    "fig2c": canned_fig2c,
    "fig4a": canned_fig4a,
    "fig4b": canned_fig4b,
    "subspace": canned_subspace,
    "toy2d": canned_toy2d,
    "j1-demo": canned_j1,
}

RUNNERS = {
    "check-kernel": _run_check_kernel,
    "divergence": _run_divergence,
    "subspace-noise": _run_subspace_noise,
    "ica": _run_ica,
    "pca": _run_pca,
    "dvae": _run_dvae,
    "toy2d": _run_toy2d,
    "experiment": lambda p, seed: CANNED[p["which"]](p, seed),
}


def execute(spec):
    """Run ``spec`` in memory and return its :class:`RunResult`."""
    return RUNNERS[spec.subcommand](spec.params, spec.seed)


def meta_text(spec):
    return serialize_config(spec) + f"\n[{META_SECTION}]\nseed = {spec.seed}\nversion = {__version__}\n"


def write_result(spec, result, outdir=None):
    """Write results.csv, meta.txt and any extra CSVs; return the directory."""
    out = Path(spec.output if outdir is None else outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(csv_text(result.header, result.rows))
        for name, (header, rows) in result.extra_csv.items():
            (out / name).write_text(csv_text(header, rows))
        if result.summary:
            (out / "summary.txt").write_text("\n".join(result.summary) + "\n")
        (out / "meta.txt").write_text(meta_text(spec))
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc.strerror or exc}") from exc
    return out


def run_experiment(spec, outdir=None):
    """Execute ``spec`` and write its files; returns (exit status, directory)."""
    result = execute(spec)
    return 0, write_result(spec, result, outdir)
