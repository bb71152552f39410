"""Command-line interface: rule synthesis, gradient estimation and sweeps.

Everything prints or writes plain JSON/CSV; plotting is left to external
tools.  Exit codes: 0 success, 2 infeasible constraint system, 3
ill-conditioned kernel, 4 insufficient shots, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import analytic, applications, l1opt, linsys, spectrum, stochastic
from .errors import (IllConditionedError, InsufficientShotsError,
                     InvalidArgumentError, NoSolutionError, ShiftRuleError)
from .rng import make_rng
from .specfun import MeasurementModel, SpectralFunction, exact_derivative
from .spectrum import FrequencySet

CSV_SCHEMA = "shiftrules-sweep-v1"

EXIT_OK = 0
EXIT_GENERIC = 1
EXIT_INFEASIBLE = 2
EXIT_ILL_CONDITIONED = 3
EXIT_INSUFFICIENT_SHOTS = 4


# ---------------------------------------------------------------------------
# Spec parsing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelBundle:
    """A named model resolved into the pieces the commands need."""

    name: str
    omega: FrequencySet | None
    function: SpectralFunction | None
    bandwidth: float
    shared: applications.SharedZModel | None = None


def parse_omega(spec: str) -> FrequencySet:
    """Frequency sets: ``equispaced:N``, ``xy:L`` or a comma list of positives."""
    if spec.startswith("equispaced:"):
        return spectrum.equispaced(int(spec.split(":", 1)[1]))
    if spec.startswith("xy:"):
        return applications.xy_spectrum(int(spec.split(":", 1)[1]))
    positive = sorted(float(x) for x in spec.split(",") if x.strip())
    if not positive or any(w <= 0 for w in positive):
        raise InvalidArgumentError(
            "omega list must contain strictly positive frequencies")
    freqs = [-w for w in reversed(positive)] + [0.0] + positive
    return FrequencySet(tuple(freqs))


def parse_model(spec: str, seed: int) -> ModelBundle:
    """Named models: equispaced:N, xy:L, jc:d,l,a,cutoff, shared-z:w1,w2,..."""
    kind, _, rest = spec.partition(":")
    if kind == "equispaced":
        omega = spectrum.equispaced(int(rest))
        from .specfun import random_spectral_function
        f = random_spectral_function(omega, seed)
        return ModelBundle(spec, omega, f, spectrum.bandwidth(omega))
    if kind == "xy":
        length = int(rest)
        omega = applications.xy_spectrum(length)
        return ModelBundle(spec, omega, applications.xy_function(length),
                           spectrum.bandwidth(omega))
    if kind == "jc":
        d, lam, alpha, cutoff = rest.split(",")
        params = applications.JCParams(float(d), float(lam), float(alpha),
                                       int(cutoff))
        f = applications.jc_function(params)
        levels = applications.jc_levels(params.detuning, params.coupling,
                                        params.cutoff)
        omega = spectrum.from_eigenvalues(levels)
        return ModelBundle(spec, omega, f, spectrum.bandwidth(omega))
    if kind == "shared-z":
        weights = tuple(float(x) for x in rest.split(","))
        shared = applications.shared_z_model(weights, seed)
        return ModelBundle(spec, shared.omega, shared.function,
                           shared.bandwidth, shared)
    raise InvalidArgumentError(f"unknown model spec {spec!r}")


def parse_grid(spec: str, n_constraints: int) -> tuple[str, int, float]:
    """Grid spec ``kind:P[:B]`` with P defaulting to twice the constraints."""
    if not spec:
        return "odd", max(2 * n_constraints, 1), math.pi
    parts = spec.split(":")
    kind = parts[0]
    p = int(parts[1]) if len(parts) > 1 and parts[1] else 2 * n_constraints
    b = float(parts[2]) if len(parts) > 2 else math.pi
    return kind, p, b


def _build_system(omega: FrequencySet, grid_spec: str) -> linsys.LinearSystem:
    n_pos = len(spectrum.positive_part(omega))
    kind, p, b = parse_grid(grid_spec, n_pos)
    grid = linsys.shift_grid(kind, p, b)
    return linsys.assemble(omega, linsys.positive_shifts(grid), symmetric=True)


# ---------------------------------------------------------------------------
# synthesize
# ---------------------------------------------------------------------------

def cmd_synthesize(args) -> int:
    if args.model:
        bundle = parse_model(args.model, args.seed)
        omega = bundle.omega
        lam = bundle.bandwidth
    else:
        omega = parse_omega(args.omega)
        lam = spectrum.bandwidth(omega)
    method, _, detail = args.method.partition(":")

    if method in ("l1", "l2", "tv"):
        if omega is None:
            raise InvalidArgumentError("this method needs an explicit omega")
        system = _build_system(omega, args.grid)
        if not linsys.feasible(system):
            print("infeasible: rank([matrix|rhs]) exceeds rank(matrix); "
                  "add shifts (larger P) or change the grid", file=sys.stderr)
            return EXIT_INFEASIBLE
        solver = {"l1": l1opt.solve_l1, "l2": linsys.solve_l2,
                  "tv": l1opt.solve_tv}[method]
        rule = solver(system)
        payload = rule.to_json_dict()
        report = {"residual": linsys.verify(rule, omega),
                  "l1_norm": rule.l1_norm, "shifts": len(rule)}
    elif method == "equispaced":
        n = int(round(lam))
        if abs(lam - n) > 1e-9 or n < 1:
            raise InvalidArgumentError(
                "equispaced closed form needs an integer bandwidth")
        rule = analytic.equispaced_rule(n)
        payload = rule.to_json_dict()
        report = {"residual": linsys.verify(rule, spectrum.equispaced(n)),
                  "l1_norm": rule.l1_norm, "shifts": len(rule)}
    elif method == "approx":
        l_str, p_str = detail.split(",")
        system = analytic.approx_bandwidth_system(lam, int(l_str), int(p_str))
        if not linsys.feasible(system):
            print("infeasible: rank([matrix|rhs]) exceeds rank(matrix); "
                  "add shifts (larger P) or change the grid", file=sys.stderr)
            return EXIT_INFEASIBLE
        rule = l1opt.solve_l1(system)
        payload = rule.to_json_dict()
        grid_omega = FrequencySet(tuple(
            (lam * np.arange(-int(l_str), int(l_str) + 1) / int(l_str)).tolist()))
        report = {"residual": linsys.verify(rule, grid_omega),
                  "l1_norm": rule.l1_norm, "shifts": len(rule)}
    elif method == "triangle":
        payload = {"type": "stochastic", "method": "triangle",
                   "bandwidth": lam, "l1_bound": lam}
        report = {"l1_norm": lam}
    elif method == "zigzag":
        payload = {"type": "stochastic", "method": "zigzag",
                   "bandwidth": lam, "l1_bound": 2.0 * lam}
        report = {"l1_norm": 2.0 * lam}
    elif method == "kernel":
        if omega is None:
            raise InvalidArgumentError("kernel synthesis needs an explicit omega")
        family, _, b_str = detail.partition(":")
        spec = analytic.KernelSpec(family, float(b_str))
        weights = analytic.kernel_weights(omega, spec)
        radii = analytic.kernel_gershgorin(omega, spec)
        payload = {"type": "stochastic", "method": "kernel",
                   "family": family, "B": spec.b,
                   "frequencies": list(omega.frequencies),
                   "weights": weights.tolist()}
        report = {"l1_bound": float(np.sum(np.abs(weights))),
                  "max_gershgorin_radius": float(np.max(radii))}
    else:
        raise InvalidArgumentError(f"unknown method {args.method!r}")

    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(json.dumps({"report": report}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def _deterministic_from_rule(rule, bundle, args, rng):
    model = MeasurementModel(bundle.function, noiseless=args.noiseless)
    plan = stochastic.allocate_shots(rule, args.shots)
    return stochastic.deterministic_estimate(rule.expanded(), model,
                                             args.theta, plan, rng)


def cmd_estimate(args) -> int:
    bundle = parse_model(args.model, args.seed)
    if bundle.function is None:
        raise InvalidArgumentError(
            "model has no explicit spectral function (bandwidth-only fallback)")
    model = MeasurementModel(bundle.function, noiseless=args.noiseless)
    rng = make_rng(args.seed, stream=1)

    if args.rule:
        with open(args.rule) as fh:
            data = json.load(fh)
        if data.get("type") == "stochastic":
            raise InvalidArgumentError(
                "stochastic descriptors are estimated via --method")
        rule = linsys.ShiftRule.from_json_dict(data)
        estimate = _deterministic_from_rule(rule, bundle, args, rng)
    else:
        method, _, detail = (args.method or "").partition(":")
        if method in ("l1", "l2", "tv"):
            system = _build_system(bundle.omega, args.grid)
            if not linsys.feasible(system):
                print("infeasible grid for this model", file=sys.stderr)
                return EXIT_INFEASIBLE
            solver = {"l1": l1opt.solve_l1, "l2": linsys.solve_l2,
                      "tv": l1opt.solve_tv}[method]
            estimate = _deterministic_from_rule(solver(system), bundle, args, rng)
        elif method == "equispaced":
            n = int(round(bundle.bandwidth))
            estimate = _deterministic_from_rule(
                analytic.equispaced_rule(n), bundle, args, rng)
        elif method == "triangle":
            estimate = stochastic.triangle_estimate(
                bundle.bandwidth, model, args.theta, args.shots, rng)
        elif method == "zigzag":
            estimate = stochastic.zigzag_estimate(
                bundle.bandwidth, model, args.theta, args.shots, rng)
        elif method == "kernel":
            family, _, b_str = detail.partition(":")
            spec = analytic.KernelSpec(family, float(b_str))
            estimate = stochastic.kernel_estimate(
                spec, bundle.omega, model, args.theta, args.shots, rng)
        else:
            raise InvalidArgumentError("pass --rule FILE or a valid --method")

    print(estimate.to_json(seed=args.seed))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _write_csv(path: str, schema_note: str, header: list[str],
               rows: list[list]) -> None:
    lines = [f"# {CSV_SCHEMA} {schema_note}", ",".join(header)]
    for row in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x)
                              for x in row))
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _sweep_norm_vs_p(args) -> tuple[str, list[str], list[list]]:
    rows = []
    for n in [int(x) for x in args.n.split(",")]:
        omega = spectrum.equispaced(n)
        step = args.p_step or max(1, n // 10)
        for p in range(n, 4 * n + 1, step):
            grid = linsys.shift_grid("odd", p, math.pi)
            system = linsys.assemble(omega, linsys.positive_shifts(grid), True)
            rule = l1opt.solve_l1(system)
            rows.append([n, p, p / n, rule.l1_norm])
    return (f"experiment=norm-vs-p n={args.n}",
            ["n", "p", "p_over_n", "l1_norm"], rows)


def _sweep_dft(args) -> tuple[str, list[str], list[list]]:
    n = int(args.n.split(",")[0])
    p = args.p or 2 * n
    omega = spectrum.equispaced(n)
    grid = linsys.shift_grid("odd", p, math.pi)
    system = linsys.assemble(omega, linsys.positive_shifts(grid), True)
    rule = l1opt.solve_l1(system)
    max_h = args.max_harmonic or p
    values = linsys.dft_coefficients(rule, max_h)
    rows = [[h - max_h, float(values[h].real), float(values[h].imag)]
            for h in range(values.size)]
    return (f"experiment=dft n={n} p={p}",
            ["harmonic", "real", "imag"], rows)


def _sweep_variance_profile(args) -> tuple[str, list[str], list[list]]:
    bundle = parse_model(args.model, args.seed)
    model = MeasurementModel(bundle.function, noiseless=args.noiseless)
    n_pos = len(spectrum.positive_part(bundle.omega))
    thetas = np.linspace(0.0, 2.0 * math.pi, args.points, endpoint=False)
    methods = args.methods.split(";")
    rows = []
    for m_idx, method in enumerate(methods):
        kind, _, detail = method.partition(":")
        rule = None
        if kind == "l1":
            factor = int(detail) if detail else 2
            grid = linsys.shift_grid("odd", factor * n_pos, math.pi)
            system = linsys.assemble(bundle.omega,
                                     linsys.positive_shifts(grid), True)
            rule = stochastic.from_shift_rule(l1opt.solve_l1(system),
                                              method=f"l1:{factor}")
        for t_idx, theta in enumerate(thetas):
            rng = make_rng(args.seed, stream=1000 * m_idx + t_idx)
            if rule is not None:
                est = stochastic.stochastic_estimate(rule, model, theta,
                                                     args.shots, rng)
            elif kind == "triangle":
                est = stochastic.triangle_estimate(bundle.bandwidth, model,
                                                   theta, args.shots, rng)
            elif kind == "zigzag":
                est = stochastic.zigzag_estimate(bundle.bandwidth, model,
                                                 theta, args.shots, rng)
            elif kind == "kernel":
                family, _, b_str = detail.partition(":")
                b = float(b_str) if b_str else 2.0
                spec = analytic.KernelSpec(family, b)
                est = stochastic.kernel_estimate(spec, bundle.omega, model,
                                                 theta, args.shots, rng)
            else:
                raise InvalidArgumentError(f"unknown sweep method {method!r}")
            exact = exact_derivative(bundle.function, theta)
            rows.append([method, float(theta), est.mean, est.stderr, exact])
    note = (f"experiment=variance-profile model={args.model} "
            f"positive_frequencies={n_pos} shots={args.shots} seed={args.seed}")
    return note, ["method", "theta", "mean", "stderr", "exact"], rows


def _sweep_jc_bias(args) -> tuple[str, list[str], list[list]]:
    d, lam_c, alpha = (float(x) for x in args.jc.split(","))
    rule_params = applications.JCParams(d, lam_c, alpha, args.rule_cutoff)
    eval_params = applications.JCParams(d, lam_c, alpha, args.eval_cutoff)
    f_eval = applications.jc_function(eval_params)
    model = MeasurementModel(f_eval, noiseless=args.noiseless)
    lam = applications.jc_bandwidth(d, lam_c, args.rule_cutoff)
    system = analytic.approx_bandwidth_system(lam, args.band_l, args.band_p)
    approx_rule = l1opt.solve_l1(system)
    thetas = np.linspace(0.0, 2.0 * math.pi, args.points, endpoint=False)
    rows = []
    for t_idx, theta in enumerate(thetas):
        exact = exact_derivative(f_eval, theta)
        rng = make_rng(args.seed, stream=t_idx)
        tri = stochastic.triangle_estimate(lam, model, theta, args.shots, rng)
        plan = stochastic.allocate_shots(approx_rule, args.shots)
        rng = make_rng(args.seed, stream=10_000 + t_idx)
        det = stochastic.deterministic_estimate(approx_rule.expanded(), model,
                                                theta, plan, rng)
        rows.append(["triangle", float(theta), tri.mean, tri.stderr, exact])
        rows.append(["approx", float(theta), det.mean, det.stderr, exact])
    note = (f"experiment=jc-bias jc={args.jc} rule_cutoff={args.rule_cutoff} "
            f"eval_cutoff={args.eval_cutoff} shots={args.shots} seed={args.seed}")
    return note, ["method", "theta", "mean", "stderr", "exact"], rows


def cmd_sweep(args) -> int:
    runner = {"norm-vs-p": _sweep_norm_vs_p,
              "dft": _sweep_dft,
              "variance-profile": _sweep_variance_profile,
              "jc-bias": _sweep_jc_bias}.get(args.experiment)
    if runner is None:
        raise InvalidArgumentError(f"unknown experiment {args.experiment!r}")
    note, header, rows = runner(args)
    _write_csv(args.out, note, header, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftrules",
        description="Synthesize, verify and benchmark parameter-shift rules.")
    sub = parser.add_subparsers(dest="command", required=True)

    syn = sub.add_parser("synthesize", help="build a rule for a frequency set")
    syn.add_argument("--omega", help="equispaced:N | xy:L | w1,w2,...")
    syn.add_argument("--model", help="equispaced:N | xy:L | jc:d,l,a,c | shared-z:w,...")
    syn.add_argument("--method", required=True,
                     help="l1 | l2 | tv | triangle | zigzag | "
                          "kernel:<family>:<B> | equispaced | approx:<L>,<P>")
    syn.add_argument("--grid", default="", help="kind:P[:B], default odd:2N:pi")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", default="", help="rule JSON output path")
    syn.set_defaults(func=cmd_synthesize)

    est = sub.add_parser("estimate", help="estimate a derivative")
    est.add_argument("--model", required=True)
    est.add_argument("--rule", default="", help="rule JSON produced by synthesize")
    est.add_argument("--method", default="",
                     help="l1 | l2 | tv | equispaced | triangle | zigzag | "
                          "kernel:<family>:<B>")
    est.add_argument("--grid", default="")
    est.add_argument("--theta", type=float, default=0.0)
    est.add_argument("--shots", type=int, default=1000)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--noiseless", action="store_true")
    est.set_defaults(func=cmd_estimate)

    swp = sub.add_parser("sweep", help="grid experiments with CSV output")
    swp.add_argument("--experiment", required=True,
                     help="norm-vs-p | dft | variance-profile | jc-bias")
    swp.add_argument("--out", default="", help="CSV output path (default stdout)")
    swp.add_argument("--n", default="20", help="comma list of N values")
    swp.add_argument("--p", type=int, default=0)
    swp.add_argument("--p-step", type=int, default=0)
    swp.add_argument("--max-harmonic", type=int, default=0)
    swp.add_argument("--model", default="xy:10")
    swp.add_argument("--methods", default="l1:1;l1:2;l1:4;triangle;kernel:cauchy:2")
    swp.add_argument("--points", type=int, default=8)
    swp.add_argument("--shots", type=int, default=2000)
    swp.add_argument("--seed", type=int, default=0)
    swp.add_argument("--noiseless", action="store_true")
    swp.add_argument("--jc", default="0.2,0.5,1.0", help="detuning,coupling,alpha")
    swp.add_argument("--rule-cutoff", type=int, default=10)
    swp.add_argument("--eval-cutoff", type=int, default=100)
    swp.add_argument("--band-l", type=int, default=100)
    swp.add_argument("--band-p", type=int, default=1000)
    swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoSolutionError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except IllConditionedError as exc:
        print(f"ill-conditioned: {exc}", file=sys.stderr)
        return EXIT_ILL_CONDITIONED
    except InsufficientShotsError as exc:
        print(f"insufficient shots: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_SHOTS
    except (ShiftRuleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERIC


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
