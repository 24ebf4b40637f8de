"""Command-line experiments.

Every subcommand reads its settings from flags, optionally layered over a
flat ``key = value`` config file (``--config``); flags win.  The seed falls
back to ``$TIMEROBUST_SEED`` and then 0.  All settings are validated before
any simulation starts and every problem is reported at once.

Output is a CSV (stdout, or ``--out`` written atomically) whose rows all end
with the digest of the validated config, plus a one-line JSON manifest next
to it.  Exit codes: 0 success, 1 selftest failure, 2 invalid config,
3 non-finite numerics, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from importlib import metadata
from typing import Any, Callable, Optional

import numpy as np

from .adversaries import DEFAULT_N0, DEFAULT_NMAX, parse_rule
from .engine import NumericalError, check_seed, config_digest, seeds_for_grid
from .estimators import get_estimator
from .model import get_family, get_rate
from .risk import bayes_risk, standard_risk, strong_risk_curve, trigger_report, weak_risk
from .selection import get_selector, post_selection_risk
from .supermartingale import MixtureSpec, supermartingale_check

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4
SEED_ENV = "TIMEROBUST_SEED"
# settings that change where or how fast results appear, not what they are
_NOT_DIGESTED = {"workers", "out", "dump", "plot", "config"}


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# --------------------------------------------------------------------------
# value parsers (str -> value; raise ValueError with a readable message)


def _int(text) -> int:
    text = str(text).strip()
    try:
        return int(text)
    except ValueError:
        pass
    f = float(text)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(f)


def _int_list(text) -> list[int]:
    return [_int(t) for t in str(text).split(",") if t.strip()]


def _point(text: str):
    parts = [float(p) for p in text.split(";")]
    return parts[0] if len(parts) == 1 else parts


def _grid(text) -> list:
    """``a,b,c`` or ``lo:hi:count``; vector points use ``;`` between coordinates."""
    text = str(text).strip()
    if text.count(":") == 2 and ";" not in text:
        lo, hi, cnt = text.split(":")
        return [float(v) for v in np.linspace(float(lo), float(hi), _int(cnt))]
    return [_point(t.strip()) for t in text.split(",") if t.strip()]


def _str(text) -> str:
    return str(text).strip()


def _choice(*options) -> Callable:
    def parse(text):
        t = str(text).strip()
        if t not in options:
            raise ValueError(f"unknown value {t!r}; valid values: {list(options)}")
        return t

    return parse


@dataclass
class Setting:
    parser: Callable
    default: Any
    help: str
    flags: tuple = ()


COMMON = {
    "family": Setting(_str, "gaussian", "family id: gaussian, bernoulli, product_gaussian:<k>"),
    "reps": Setting(_int, 10**4, "Monte Carlo replications (>= 2)"),
    "seed": Setting(_int, None, f"master seed (fallback ${SEED_ENV}, then 0)"),
    "workers": Setting(_int, 1, "worker processes (results do not depend on this)"),
    "out": Setting(_str, None, "CSV output path (default: stdout)"),
    "plot": Setting(_str, None, "optional PNG line chart of the results"),
}

COMMANDS: dict[str, dict[str, Setting]] = {
    "risk": {
        "functional": Setting(
            _choice("standard", "weak", "strong", "bayes"),
            None,
            "risk functional (default: weak with --rule, strong with --horizon, else standard)",
        ),
        "mu": Setting(_grid, [0.0], "true mean(s): a,b,c or lo:hi:count", ("--mu", "--mu-grid")),
        "estimator": Setting(_str, "mle", "estimator id: mle, posterior_mean, dyadic:<base>"),
        "rule": Setting(_str, None, "stopping rule: fixed:N, lil:c,n0,nmax, gap:est,c,n0,nmax, capped:c,n0,n1"),
        "rate": Setting(_str, "f_loglog", "comma-separated rate ids: f_loglog, g_1_over_n, g_log_over_n, one"),
        "n": Setting(_int_list, None, "sample size(s) for the standard risk"),
        "horizon": Setting(_int_list, None, "horizon(s) N for the strong risk (one pass serves all)"),
        "prior_sd": Setting(float, 1.0, "prior standard deviation for the bayes functional"),
        "n0": Setting(_int, DEFAULT_N0, "burn-in for rules that omit it"),
        "nmax": Setting(_int, DEFAULT_NMAX, "hard cap for rules that omit it"),
        "n1": Setting(_int, 1000, "cap of the capped rule when omitted"),
        "c": Setting(float, 0.1, "rule constant c when omitted"),
        "dump": Setting(_str, None, "CSV path for the per-replicate loss ratios"),
    },
    "supermartingale-check": {
        "mu": Setting(_grid, [0.0], "true mean(s)", ("--mu", "--mu-grid")),
        "checkpoints": Setting(_int_list, [1, 10, 100, 1000], "time steps at which to report"),
        "c0": Setting(float, None, "mixture scale (default 0.99 x admissible sup)"),
        "side": Setting(_choice("+", "-"), "+", "which sign mixture (k = 1)"),
    },
    "adversary-demo": {
        "mu": Setting(_grid, [0.0], "true mean(s)", ("--mu", "--mu-grid")),
        "estimator": Setting(_str, "posterior_mean", "estimator id"),
        "rule": Setting(_str, "lil", "stopping rule"),
        "rate": Setting(_str, "f_loglog", "rate id"),
        "n0": Setting(_int, DEFAULT_N0, "burn-in for rules that omit it"),
        "nmax": Setting(_int, DEFAULT_NMAX, "hard cap for rules that omit it"),
        "n1": Setting(_int, 1000, "cap of the capped rule when omitted"),
        "c": Setting(float, 0.1, "rule constant c when omitted"),
    },
    "dilemma": {
        "selector": Setting(_choice("aic", "bic"), "bic", "model selection criterion"),
        "mu": Setting(_grid, [0.0, 0.1, 0.3, 1.0], "true mean(s)", ("--mu-grid", "--mu")),
        "n_grid": Setting(_int_list, [100, 1000, 10000], "sample sizes", ("--n-grid",)),
        "rate": Setting(_str, "f_loglog", "rate id for the risk column"),
        "functional": Setting(_choice("standard", "strong"), "standard", "risk reported in risk_mean"),
        "mu0": Setting(float, 0.0, "the point model's mean"),
    },
    "selftest": {},
}

COLUMNS = {
    "risk": [
        "functional", "family", "mu", "estimator", "rule", "rate", "n_or_N", "mean", "se",
        "conditional_mean", "cap_hits", "reps", "seed",
    ],
    "supermartingale-check": ["mu", "n", "mean_Z", "se_Z", "mean_evalue", "se_evalue", "reps", "seed"],
    "adversary-demo": [
        "family", "mu", "estimator", "rule", "rate", "reps", "trigger_rate", "cap_hits", "mean_tau",
        "median_tau", "postcondition_rate", "mean", "se", "conditional_mean", "seed",
    ],
    "dilemma": ["selector", "mu", "n", "p_select_m1", "risk_mean", "risk_se", "rate", "reps", "seed"],
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = errors


@dataclass
class ExperimentConfig:
    command: str
    values: dict
    built: dict = field(default_factory=dict)  # family, estimator, rules, rates

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    @property
    def digest(self) -> str:
        canon = {k: v for k, v in self.values.items() if k not in _NOT_DIGESTED}
        return config_digest(command=self.command, **canon)


# --------------------------------------------------------------------------
# parsing and validation


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes in keys are
    read as underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError([f"{path}:{lineno}: expected key = value"])
            key, val = (p.strip() for p in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _settings(command: str) -> dict[str, Setting]:
    return {**COMMON, **COMMANDS[command]}


def parse_config(command: str, flags: dict, file_values: Optional[dict] = None, env=None) -> ExperimentConfig:
    """Merge defaults < file < flags, parse every value and check it.

    Raises :class:`ConfigError` listing all problems found.
    """
    env = os.environ if env is None else env
    settings = _settings(command)
    errors = []
    raw: dict[str, Any] = {}
    for key, val in (file_values or {}).items():
        key = "mu" if key == "mu_grid" else key
        if key not in settings:
            errors.append(f"unknown config key {key!r} for {command}")
        else:
            raw[key] = val
    raw.update({k: v for k, v in flags.items() if v is not None})
    if raw.get("seed") is None and env.get(SEED_ENV):
        raw["seed"] = env[SEED_ENV]
    values = {}
    for key, st in settings.items():
        if key in raw:
            try:
                values[key] = st.parser(raw[key])
            except (ValueError, TypeError) as exc:
                errors.append(f"{key}: {exc}")
                continue
        else:
            values[key] = st.default
    if values.get("seed") is None and "seed" not in raw:
        values["seed"] = 0
    cfg = ExperimentConfig(command, values)
    if not errors:
        errors.extend(_check(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _collect(errors, key, func):
    try:
        return func()
    except (ValueError, TypeError) as exc:
        errors.append(f"{key}: {exc}")
        return None


def _check(cfg: ExperimentConfig) -> list[str]:
    v, errors = cfg.values, []
    if cfg.command == "selftest":
        _collect(errors, "seed", lambda: check_seed(v["seed"]))
        return errors
    if v["reps"] < 2:
        errors.append(f"reps: must be at least 2, got {v['reps']}")
    if v["workers"] < 1:
        errors.append("workers: must be at least 1")
    _collect(errors, "seed", lambda: check_seed(v["seed"]))
    family = _collect(errors, "family", lambda: get_family(v["family"]))
    cfg.built["family"] = family
    if family is not None:
        bad = [m for m in v.get("mu", []) if not _point_ok(family, m)]
        if bad:
            errors.append(f"mu: values {bad} lie outside the parameter set of {family.name}")
        if not v.get("mu", [0.0]):
            errors.append("mu: empty grid")
    checker = {
        "risk": _check_risk,
        "supermartingale-check": _check_supermartingale,
        "adversary-demo": _check_adversary,
        "dilemma": _check_dilemma,
    }[cfg.command]
    checker(cfg, family, errors)
    return errors


def _point_ok(family, mu) -> bool:
    try:
        family.check_mu(mu)
        return True
    except ValueError:
        return False


def _rates(text, errors):
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        errors.append("rate: no rate given")
    return [r for r in (_collect(errors, "rate", lambda n=n: get_rate(n)) for n in names) if r]


def _rule(cfg, errors, estimator=None):
    v = cfg.values
    return _collect(
        errors,
        "rule",
        lambda: parse_rule(v["rule"], estimator, c=v["c"], n0=v["n0"], nmax=v["nmax"], n1=v["n1"]),
    )


def _check_risk(cfg, family, errors):
    v = cfg.values
    est = _collect(errors, "estimator", lambda: get_estimator(v["estimator"]))
    cfg.built["estimator"] = est
    cfg.built["rates"] = _rates(v["rate"], errors)
    func = v["functional"] or (
        "weak" if v["rule"] else "strong" if v["horizon"] else "standard"
    )
    v["functional"] = func
    if func == "standard" and not v["n"]:
        errors.append("n: the standard risk needs --n")
    if func == "strong" and not (v["horizon"] or v["n"]):
        errors.append("horizon: the strong risk needs --horizon")
    if func in ("weak", "bayes") and not v["rule"]:
        if func == "bayes" and v["n"] and len(v["n"]) == 1:
            v["rule"] = f"fixed:{v['n'][0]}"
        else:
            errors.append(f"rule: the {func} risk needs --rule")
    for key in ("n", "horizon"):
        if v[key] and min(v[key]) < 1:
            errors.append(f"{key}: values must be positive")
    if func == "bayes" and v["prior_sd"] <= 0:
        errors.append("prior_sd: must be positive")
    if v["rule"]:
        cfg.built["rule"] = _rule(cfg, errors, est)
    for obj, key in ((est, "estimator"), (cfg.built.get("rule"), "rule")):
        if obj is not None and family is not None:
            _collect(errors, key, lambda o=obj: o.validate(family))


def _check_supermartingale(cfg, family, errors):
    v = cfg.values
    if not v["checkpoints"] or min(v["checkpoints"]) < 1:
        errors.append("checkpoints: need positive time steps")
    if family is not None:
        if v["side"] == "-" and family.k != 1:
            errors.append("side: '-' applies to one-dimensional families only")
        cfg.built["spec"] = _collect(errors, "c0", lambda: MixtureSpec.for_family(family, v["c0"]))


def _check_adversary(cfg, family, errors):
    v = cfg.values
    est = _collect(errors, "estimator", lambda: get_estimator(v["estimator"]))
    cfg.built["estimator"] = est
    rates = _rates(v["rate"], errors)
    if len(rates) > 1:
        errors.append("rate: adversary-demo takes a single rate")
    cfg.built["rates"] = rates
    cfg.built["rule"] = _rule(cfg, errors, est)
    for obj, key in ((est, "estimator"), (cfg.built["rule"], "rule")):
        if obj is not None and family is not None:
            _collect(errors, key, lambda o=obj: o.validate(family))


def _check_dilemma(cfg, family, errors):
    v = cfg.values
    cfg.built["selector"] = get_selector(v["selector"])
    rates = _rates(v["rate"], errors)
    if len(rates) > 1:
        errors.append("rate: dilemma takes a single rate")
    cfg.built["rates"] = rates
    if not v["n_grid"] or min(v["n_grid"]) < 1:
        errors.append("n_grid: need positive sample sizes")
    if family is not None and (not family.gaussian or family.k != 1):
        errors.append(f"family: dilemma needs the one-dimensional Gaussian family, not {family.name}")


# --------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    dump: list = field(default_factory=list)  # (row index, losses)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (list, tuple)):
        return ";".join(_fmt(v) for v in x)
    return "" if x is None else str(x)


def run_risk(cfg: ExperimentConfig) -> RunResult:
    v, b = cfg.values, cfg.built
    fam, est, func = b["family"], b["estimator"], v["functional"]
    rows, dump = [], []
    keep = v.get("dump") is not None

    def add(r, mu, rate, rule_name):
        rows.append(
            {
                "functional": func, "family": fam.name, "mu": mu, "estimator": est.name,
                "rule": rule_name, "rate": rate.name, "n_or_N": r.n, "mean": r.mean, "se": r.se,
                "conditional_mean": r.conditional_mean, "cap_hits": r.cap_hits, "reps": r.reps,
                "seed": r.seed,
            }
        )
        if keep:
            dump.append((len(rows) - 1, r.losses))

    if func == "bayes":
        rule = b["rule"]
        for rate in b["rates"]:
            r = bayes_risk(fam, v["prior_sd"], est, rule, rate, v["reps"], v["seed"], v["workers"], keep)
            add(r, f"N(0,{v['prior_sd']:g}^2)", rate, rule.name)
        return RunResult(rows, {}, dump)
    for mu, seed in zip(v["mu"], seeds_for_grid(v["seed"], len(v["mu"]))):
        for rate in b["rates"]:
            if func == "standard":
                for n in v["n"]:
                    r = standard_risk(fam, mu, est, rate, n, v["reps"], seed, v["workers"], keep)
                    add(r, mu, rate, f"fixed:{n}")
            elif func == "weak":
                r = weak_risk(fam, mu, est, b["rule"], rate, v["reps"], seed, v["workers"], keep_losses=keep)
                add(r, mu, rate, b["rule"].name)
            else:
                hs = v["horizon"] or v["n"]
                curve = strong_risk_curve(fam, mu, est, rate, hs, v["reps"], seed, v["workers"], keep_losses=keep)
                for r in curve.estimates:
                    add(r, mu, rate, "in-path sup")
    summary = {}
    if len(v["mu"]) > 1:
        best: dict = {}
        for row in rows:
            key = f"{row['rate']}@{row['n_or_N']}"
            if key not in best or row["mean"] > best[key][0]:
                best[key] = (row["mean"], row["mu"])
        summary["argmax_mu"] = {k: mu for k, (_, mu) in best.items()}
        summary["sup_surrogate"] = "finite mu grid"
    if func == "weak":
        summary["note"] = "reported weak risk is a certified lower bound (one rule, not all stopping times)"
    return RunResult(rows, summary, dump)


def run_supermartingale(cfg: ExperimentConfig) -> RunResult:
    v, b = cfg.values, cfg.built
    fam, spec = b["family"], b["spec"]
    mixture = 0 if v["side"] == "+" else spec.n_mixtures // 2
    rows = []
    for mu, seed in zip(v["mu"], seeds_for_grid(v["seed"], len(v["mu"]))):
        chk = supermartingale_check(fam, mu, v["checkpoints"], v["reps"], seed, spec, mixture, v["workers"])
        for row in chk.rows():
            rows.append({"mu": mu, **row, "reps": v["reps"], "seed": seed})
    return RunResult(rows, {"c0": spec.c0, "sigma": spec.sigma, "delta": spec.delta})


def run_adversary(cfg: ExperimentConfig) -> RunResult:
    v, b = cfg.values, cfg.built
    fam, est, rule, rate = b["family"], b["estimator"], b["rule"], b["rates"][0]
    rows = []
    for mu, seed in zip(v["mu"], seeds_for_grid(v["seed"], len(v["mu"]))):
        rep = trigger_report(fam, mu, est, rule, rate, v["reps"], seed, v["workers"])
        r = rep.risk
        rows.append(
            {
                "family": fam.name, "mu": mu, "estimator": est.name, "rule": rule.name, "rate": rate.name,
                "reps": r.reps, "trigger_rate": rep.trigger_rate, "cap_hits": r.cap_hits,
                "mean_tau": float(rep.tau.mean()), "median_tau": float(np.median(rep.tau)),
                "postcondition_rate": rep.postcondition_rate, "mean": r.mean, "se": r.se,
                "conditional_mean": r.conditional_mean, "seed": seed,
            }
        )
    return RunResult(rows)


def run_dilemma(cfg: ExperimentConfig) -> RunResult:
    v, b = cfg.values, cfg.built
    rate = b["rates"][0]
    out = post_selection_risk(
        b["selector"], v["mu"], rate, v["n_grid"], v["reps"], v["seed"], v["mu0"], v["workers"], b["family"]
    )
    rows = []
    for r in out:
        risk = r.risk if v["functional"] == "standard" else r.strong
        rows.append(
            {
                "selector": r.selector, "mu": r.mu, "n": r.n, "p_select_m1": r.p_select_m1.mean,
                "risk_mean": risk.mean, "risk_se": risk.se, "rate": r.rate, "reps": r.reps, "seed": r.seed,
            }
        )
    return RunResult(rows, {"functional": v["functional"]})


RUNNERS = {
    "risk": run_risk,
    "supermartingale-check": run_supermartingale,
    "adversary-demo": run_adversary,
    "dilemma": run_dilemma,
}


def render_csv(command: str, rows: list[dict], digest: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = COLUMNS[command]
    w.writerow(cols + ["config_digest"])
    for row in rows:
        w.writerow([_fmt(row[c]) for c in cols] + [digest])
    return buf.getvalue()


def atomic_write(path: str, text: str) -> None:
    """Write via a temporary file in the target directory and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_csv(dump) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "replicate", "loss_ratio"])
    for row, losses in dump:
        for i, x in enumerate(losses):
            w.writerow([row, i, repr(float(x))])
    return buf.getvalue()


_PLOT_AXES = {
    "risk": ("n_or_N", "mean", ("functional", "mu", "rate")),
    "supermartingale-check": ("n", "mean_Z", ("mu",)),
    "adversary-demo": ("mu", "trigger_rate", ("rule",)),
    "dilemma": ("n", "risk_mean", ("mu",)),
}


def write_plot(path: str, command: str, rows: list[dict]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x, y, keys = _PLOT_AXES[command]
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(_fmt(row[k]) for k in keys), []).append((row[x], row[y]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in groups.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=" ".join(label))
    if command in ("risk", "supermartingale-check", "dilemma"):
        ax.set_xscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def run(cfg: ExperimentConfig, stdout=None, stderr=None) -> int:
    """Execute a validated config; returns the process exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if cfg.command == "selftest":
        from .selftest import run_selftest

        return EXIT_OK if run_selftest(cfg.seed, stdout) else EXIT_SELFTEST
    t0 = time.perf_counter()
    try:
        res = RUNNERS[cfg.command](cfg)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return EXIT_NUMERIC
    wall = time.perf_counter() - t0
    text = render_csv(cfg.command, res.rows, cfg.digest)
    manifest = {
        "tool": "timerobust",
        "version": _version(),
        "command": cfg.command,
        "config_digest": cfg.digest,
        "seed": cfg.seed,
        "wall_time_s": round(wall, 3),
        "rows": len(res.rows),
        **res.summary,
    }
    line = json.dumps(manifest, sort_keys=True, default=str)
    try:
        if cfg.out:
            atomic_write(cfg.out, text)
            atomic_write(cfg.out + ".manifest", line + "\n")
        else:
            stdout.write(text)
            print(line, file=stderr)
        if cfg.values.get("dump"):
            atomic_write(cfg.dump, _dump_csv(res.dump))
        if cfg.plot:
            write_plot(cfg.plot, cfg.command, res.rows)
    except OSError as exc:
        print(f"I/O failure: {exc}", file=stderr)
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timerobust", description="Time-robust risk simulations and LIL supermartingale checks."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="flat key = value file; flags override it")
        for key, st in _settings(name).items():
            if name == "selftest" and key != "seed":
                continue
            flags = st.flags or ("--" + key.replace("_", "-"),)
            default = "" if st.default is None else f" (default: {_fmt(st.default)})"
            p.add_argument(*flags, dest=key, default=None, help=st.help + default)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    path = args.pop("config", None)
    try:
        file_values = read_config_file(path) if path else {}
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"invalid config:\n  {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(command, args, file_values)
    except ConfigError as exc:
        print("invalid config:", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
