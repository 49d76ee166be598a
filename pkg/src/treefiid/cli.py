"""CLI interface for treefiid."""

import logging
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, NoReturn

import click
import numpy as np

from treefiid import __version__
from treefiid.configuration import (
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    EXIT_DOMAIN_ERROR,
    EXIT_OK,
    EXIT_USAGE,
)
from treefiid.counting_oracle import (
    brute_force_expected_colorings,
    expected_colorings,
    log_rate,
    rate,
)
from treefiid.derive import (
    BUILTINS,
    REFERENCE_INEQUALITIES,
    blow_up,
    derive_inequality,
    flower_bound,
    lift_base,
    reference_inequality,
)
from treefiid.exceptions import FormatError, TreeFiidError
from treefiid.formats import (
    parse_chain,
    parse_collection,
    parse_graph,
    parse_inequalities,
    render_chain,
    render_collection,
    render_graph,
    render_inequality,
)
from treefiid.graph_core import BaseGraph, WalkAssignment
from treefiid.lift_sim import (
    SimulationReport,
    count_short_cycles,
    get_rule,
    r_nice_flags,
    random_lift,
    run_simulation,
    sharpness_ratio,
    simulated_collection,
)
from treefiid.markov import (
    FAMILIES,
    MarkovChain,
    admissible_intervals,
    check,
    edge_entropy,
    get_family,
    nats_to_bits,
    scan_regime,
    spectral_bound,
    spectral_thresholds,
    vertex_entropy,
)
from treefiid.serializers import (
    get_serializer,
    inequality_to_dict,
    load_inequality_document,
    report_to_dict,
)
from treefiid.type_calculus import EntropyInequality

logger = logging.getLogger(__name__)

FORMATS = ["text", "json", "yaml"]


@dataclass
class RunConfig:
    """What a subcommand was asked to do; echoed as the output header."""

    subcommand: str
    seed: int | None = None
    params: dict[str, Any] = field(default_factory=dict)
    output: str | None = None

    def header(self) -> str:
        parts = [f"# treefiid {__version__}", self.subcommand]
        if self.seed is not None:
            parts.append(f"seed={self.seed}")
        parts += [f"{k}={v}" for k, v in self.params.items() if v is not None]
        return " ".join(parts)

    def emit(self, body: str) -> None:
        text = f"{self.header()}\n{body}"
        if self.output:
            Path(self.output).write_text(text)
        else:
            click.echo(text, nl=False)


class TreeFiidGroup(click.Group):
    """Click group that exits 1 on usage errors and 2 on numeric failures in a command."""

    def main(self, *args: Any, **kwargs: Any) -> Any:
        kwargs["standalone_mode"] = False
        try:
            result = super().main(*args, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            logger.debug("Numeric failure", exc_info=True)
            click.echo(f"Error: {type(e).__name__}: {e}", err=True)
            sys.exit(EXIT_DOMAIN_ERROR)
        sys.exit(result if isinstance(result, int) else EXIT_OK)


def _fail(e: TreeFiidError) -> NoReturn:
    click.echo(f"Error: {e}", err=True)
    sys.exit(EXIT_DOMAIN_ERROR)


def _parse_params(pairs: Sequence[str]) -> dict[str, int]:
    params: dict[str, int] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise click.BadParameter(f"'{pair}' is not key=value")
        try:
            params[key] = int(value)
        except ValueError:
            raise click.BadParameter(f"'{pair}' needs an integer value") from None
    return params


def _named_inequality(name: str, d: int, params: dict[str, int]) -> EntropyInequality:
    if name == "flower_bound":
        return flower_bound(d, params.get("i", d))
    return reference_inequality(name, d, **params)


def _all_builtins(d: int) -> list[EntropyInequality]:
    names = [n for n, r in BUILTINS.items() if not r.params] + list(REFERENCE_INEQUALITIES)
    found = [reference_inequality(name, d) for name in names]
    found += [reference_inequality("flower", d, i=i) for i in range(1, d)]
    found += [reference_inequality("sphere", d, k=k) for k in (1, 2)]
    return found


def _load_inequalities(specs: Sequence[str], d: int) -> list[EntropyInequality]:
    """Resolve --ineq values: a native, JSON or YAML file, builtin:all, or builtin:<name>[:k=v,...]."""
    found: list[EntropyInequality] = []
    for spec in specs:
        if spec == "builtin:all":
            found += _all_builtins(d)
        elif spec.startswith("builtin:"):
            _, name, *rest = spec.split(":", 2)
            params = _parse_params(rest[0].split(",")) if rest and rest[0] else {}
            found.append(_named_inequality(name, d, params))
        else:
            path = Path(spec)
            if not path.is_file():
                raise click.BadParameter(f"'{spec}' is neither a file nor builtin:<name>")
            suffix = path.suffix.lower()
            if suffix == ".json":
                found += load_inequality_document(path.read_text(), "json")
            elif suffix in (".yaml", ".yml"):
                found += load_inequality_document(path.read_text(), "yaml")
            else:
                found += parse_inequalities(path.read_text())
    if not found:
        raise click.UsageError("At least one --ineq is required")
    mismatched = [i.name for i in found if i.d != d]
    if mismatched:
        raise FormatError(f"Inequalities {mismatched} are not for T_{d}")
    return found


def _load_graph(path: str) -> tuple[BaseGraph, WalkAssignment | None]:
    return parse_graph(Path(path).read_text())


def _render(inequalities: Sequence[EntropyInequality], format: str) -> str:
    if format == "text":
        blocks = [f"# {i.render()}\n{render_inequality(i)}" for i in inequalities]
        return "".join(blocks)
    return get_serializer(format).serialize([inequality_to_dict(i) for i in inequalities])


def _report_tsv(report: SimulationReport) -> str:
    lines = [
        f"# non_nice_edge_fraction(r={report.nice_radius})={report.non_nice_edge_fraction:.6g}",
        "kind\tinequality\ttype\tcoefficient\tvalue\tstd_error",
    ]
    for t in report.terms:
        lines.append(
            f"term\t{t.inequality}\t{t.type_name}\t{t.coefficient}\t"
            f"{t.entropy:.6f}\t{t.std_error:.6f}"
        )
    for s in report.slacks:
        lines.append(f"slack\t{s.inequality}\t-\t-\t{s.slack:.6f}\t{s.std_error:.6f}")
    return "\n".join(lines) + "\n"


output_option = click.option(
    "--output", type=click.Path(dir_okay=False), default=None, help="Write to a file"
)
degree_option = click.option("--d", "d", type=click.IntRange(min=3), default=3, help="Tree degree")
format_option = click.option(
    "--format",
    type=click.Choice(FORMATS, case_sensitive=False),
    default="text",
    help="Output format (default: text)",
)
seed_option = click.option(
    "--seed", type=click.IntRange(min=0), default=DEFAULT_SEED, help="Random seed"
)


@click.group(cls=TreeFiidGroup)
@click.option("--verbose", is_flag=True, help="Log debug output to stderr")
def cli(verbose: bool) -> None:
    """treefiid - entropy inequalities for factor-of-IID processes on regular trees."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
def version() -> None:
    """Show the current version."""
    click.echo(__version__)


@cli.command()
@click.option("--builtin", "name", default=None, help="Built-in construction name")
@click.option("--graph", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--param", "params", multiple=True, help="Construction parameter key=value")
@degree_option
@format_option
@output_option
def derive(
    name: str | None,
    graph: str | None,
    params: tuple[str, ...],
    d: int,
    format: str,
    output: str | None,
) -> None:
    """Derive an entropy inequality from a construction or a graph file."""
    if (name is None) == (graph is None):
        raise click.UsageError("Give exactly one of --builtin or --graph")
    parsed = _parse_params(params)
    config = RunConfig("derive", params={"builtin": name, "graph": graph, "d": d, **parsed})
    config.output = output
    try:
        if name is not None:
            inequality = _named_inequality(name, d, parsed)
        else:
            assert graph is not None
            g, walks = _load_graph(graph)
            inequality = derive_inequality(g, walks or WalkAssignment.empty(g), Path(graph).stem)
        config.emit(_render([inequality], format))
    except TreeFiidError as e:
        _fail(e)


@cli.command()
@click.option("--ineq", "specs", multiple=True, required=True, help="File or builtin:<name>")
@click.option("--k", type=click.IntRange(min=0), required=True, help="Blow-up radius")
@degree_option
@format_option
@output_option
def blowup(specs: tuple[str, ...], k: int, d: int, format: str, output: str | None) -> None:
    """Replace every set of an inequality by its radius-k neighborhood."""
    config = RunConfig("blowup", params={"d": d, "k": k}, output=output)
    try:
        inequalities = [blow_up(i, k) for i in _load_inequalities(specs, d)]
        config.emit(_render(inequalities, format))
    except TreeFiidError as e:
        _fail(e)


@cli.command()
@click.option("--graph", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n", type=click.IntRange(min=1), required=True, help="Lift order")
@click.option("--radius", type=click.IntRange(min=0), default=2, help="Niceness radius")
@click.option("--connected", is_flag=True, help="Redraw until the lift is connected")
@seed_option
@output_option
def lift(
    graph: str, n: int, radius: int, connected: bool, seed: int, output: str | None
) -> None:
    """Draw a random n-fold lift and print it as a graph file."""
    config = RunConfig("lift", seed, {"graph": graph, "n": n, "radius": radius}, output)
    try:
        g, _ = _load_graph(graph)
        if connected:
            body = render_graph(lift_base(g, n, seed))
        else:
            lifted = random_lift(g, n, seed)
            flags = r_nice_flags(lifted, radius)
            body = (
                f"# non_nice_edge_fraction={flags.non_nice_edge_fraction:.6g}\n"
                f"# cycles(2)={count_short_cycles(lifted, 2)} "
                f"cycles(3)={count_short_cycles(lifted, 3)}\n"
                + render_graph(lifted.to_base_graph())
            )
        config.emit(body)
    except TreeFiidError as e:
        _fail(e)


@cli.command()
@click.option("--graph", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n", type=click.IntRange(min=1), required=True, help="Lift order")
@click.option("--rule", default="iid_bit", help="Local rule: iid_bit or local_max")
@click.option("--rule-radius", type=click.IntRange(min=0), default=None)
@click.option("--radius", type=click.IntRange(min=0), default=2, help="Niceness radius")
@click.option("--ineq", "specs", multiple=True, required=True, help="File or builtin:<name>")
@click.option("--samples", type=click.IntRange(min=1), default=DEFAULT_SAMPLES)
@click.option(
    "--collection-out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Also write the empirical local statistics as a collection file",
)
@click.option(
    "--format", type=click.Choice(["tsv", "json", "yaml"]), default="tsv", help="Output format"
)
@seed_option
@output_option
def simulate(
    graph: str,
    n: int,
    rule: str,
    rule_radius: int | None,
    radius: int,
    specs: tuple[str, ...],
    samples: int,
    collection_out: str | None,
    format: str,
    seed: int,
    output: str | None,
) -> None:
    """Project a local rule on a random lift and estimate inequality slacks."""
    config = RunConfig(
        "simulate",
        seed,
        {"graph": graph, "n": n, "rule": rule, "rule_radius": rule_radius,
         "radius": radius, "samples": samples},
        output,
    )
    try:
        g, _ = _load_graph(graph)
        d = g.regular_degree()
        if d is None:
            raise FormatError(f"Graph {graph} is not regular")
        inequalities = _load_inequalities(specs, d)
        local_rule = get_rule(rule, rule_radius)
        report = run_simulation(g, n, seed, local_rule, inequalities, samples, radius)
        if collection_out:
            mu = simulated_collection(g, n, seed, local_rule)
            Path(collection_out).write_text(render_collection(mu))
        if format == "tsv":
            config.emit(_report_tsv(report))
        else:
            config.emit(get_serializer(format).serialize(report_to_dict(report)))
    except TreeFiidError as e:
        _fail(e)


def _fmt(value: float, bits: bool) -> str:
    return f"{nats_to_bits(value) if bits else value:.9g}"


@cli.command()
@click.option("--family", type=click.Choice(list(FAMILIES)), default=None)
@click.option("--q", type=click.IntRange(min=2), default=3, help="Potts state count")
@click.option("--epsilon", type=float, default=None, help="Family parameter")
@click.option("--chain", "chain_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--ineq", "specs", multiple=True, help="File or builtin:<name>")
@click.option("--scan", type=(float, float, float), default=None, help="LO HI TOL")
@click.option("--bits", is_flag=True, help="Report entropies in bits")
@click.option(
    "--save-chain",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the checked chain as a chain file",
)
@degree_option
@output_option
def markov(
    family: str | None,
    q: int,
    epsilon: float | None,
    chain_path: str | None,
    specs: tuple[str, ...],
    scan: tuple[float, float, float] | None,
    bits: bool,
    save_chain: str | None,
    d: int,
    output: str | None,
) -> None:
    """Check inequalities on tree-indexed Markov chains, or scan a family for thresholds."""
    if (family is None) == (chain_path is None):
        raise click.UsageError("Give exactly one of --family or --chain")
    if scan is not None and family is None:
        raise click.UsageError("--scan needs --family")
    if scan is None and family is not None and epsilon is None:
        raise click.UsageError("--family needs --epsilon or --scan")
    if scan is not None and save_chain is not None:
        raise click.UsageError("--save-chain needs a single chain, not --scan")
    config = RunConfig(
        "markov",
        params={"family": family, "chain": chain_path, "epsilon": epsilon, "d": d,
                "scan": " ".join(map(str, scan)) if scan else None},
        output=output,
    )
    try:
        inequalities = _load_inequalities(specs, d) if specs else []
        lines: list[str] = []
        if scan is not None:
            assert family is not None
            lo, hi, tol = scan
            chains = get_family(family, q)
            for inequality in inequalities:
                zeros = scan_regime(chains, inequality, lo, hi, tol)
                lines.append(
                    f"threshold\t{inequality.name}\t" + "\t".join(f"{z:.9g}" for z in zeros)
                )
                for left, right in admissible_intervals(chains, inequality, lo, hi, tol):
                    lines.append(f"admissible\t{inequality.name}\t{left:.9g}\t{right:.9g}")
            spectral = spectral_thresholds(chains, d, lo, hi, tol)
            lines.append("spectral\t" + "\t".join(f"{z:.9g}" for z in spectral))
        else:
            mc: MarkovChain
            if chain_path is not None:
                mc = parse_chain(Path(chain_path).read_text())
            else:
                assert family is not None and epsilon is not None
                mc = get_family(family, q)(epsilon)
            if save_chain:
                Path(save_chain).write_text(render_chain(mc))
            rho, passed = spectral_bound(mc, d)
            lines.append(f"H(vertex)\t{_fmt(vertex_entropy(mc), bits)}")
            lines.append(f"H(edge)\t{_fmt(edge_entropy(mc), bits)}")
            for inequality in inequalities:
                lines.append(f"slack\t{inequality.name}\t{_fmt(check(mc, inequality), bits)}")
            lines.append(f"spectral\t{rho:.9g}\t{'pass' if passed else 'fail'}")
        config.emit("\n".join(lines) + "\n")
    except TreeFiidError as e:
        _fail(e)


@cli.command()
@click.option("--graph", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--collection", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n", type=click.IntRange(min=1), required=True, help="Lift order")
@click.option("--brute-force", is_flag=True, help="Also enumerate every lift and coloring")
@output_option
def oracle(graph: str, collection: str, n: int, brute_force: bool, output: str | None) -> None:
    """Expected number of colorings of a random lift with given statistics."""
    config = RunConfig("oracle", params={"graph": graph, "collection": collection, "n": n})
    config.output = output
    try:
        g, _ = _load_graph(graph)
        mu = parse_collection(Path(collection).read_text())
        expected = expected_colorings(g, mu, n)
        lines = [
            f"expected\t{expected}",
            f"log_per_n\t{log_rate(g, mu, n):.9g}",
            f"rate\t{rate(g, mu):.9g}",
        ]
        if brute_force:
            enumerated = brute_force_expected_colorings(g, mu, n)
            lines.append(f"brute_force\t{enumerated}")
            lines.append(f"agree\t{str(enumerated == expected).lower()}")
        config.emit("\n".join(lines) + "\n")
    except TreeFiidError as e:
        _fail(e)


@cli.command()
@click.option("--ineq", "specs", multiple=True, required=True, help="File or builtin:<name>")
@click.option("--max-r", type=click.IntRange(min=0), default=6, help="Largest radius")
@degree_option
@output_option
def sharpness(specs: tuple[str, ...], max_r: int, d: int, output: str | None) -> None:
    """Ratio of the two sides when every H(V) is replaced by |B_r(V)|."""
    config = RunConfig("sharpness", params={"d": d, "max_r": max_r}, output=output)
    try:
        lines = ["inequality\tr\tratio\tvalue"]
        for inequality in _load_inequalities(specs, d):
            for r in range(max_r + 1):
                ratio: Fraction = sharpness_ratio(inequality, r)
                lines.append(f"{inequality.name}\t{r}\t{ratio}\t{float(ratio):.9g}")
        config.emit("\n".join(lines) + "\n")
    except TreeFiidError as e:
        _fail(e)


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point for the CLI application."""
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="treefiid")
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
