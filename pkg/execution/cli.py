#!/usr/bin/env python3
"""
flowcat command line.

Subcommands:
    validate   structural and ∂² checks on a category file
    homology   Morse homology over Z, Q or Fp:p
    spectral   E1/E2 pages of the filtration spectral sequence
    generate   numeric flow category of a built-in example or spec file
    compare    chain-map and quasi-isomorphism checks of a comparison block
    realize    CW cells of the realization and a DOT attaching diagram
    schema     print the category file JSON schema

Exit codes:
    0 success, 1 failed checks, 2 parse error or unknown example,
    3 generation error, 4 shift too small, 5 any other tool error.

Usage:
    python execution/cli.py generate torus --out tmp
    python execution/cli.py homology tmp/torus.json --coeffs Z
"""

from functools import wraps
from pathlib import Path
from typing import Optional
import json
import logging
import os
import re
import sys

import click
from dotenv import load_dotenv

# Add parent directory to path so `python execution/cli.py` resolves the package
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from execution import exporters
from execution.category_file import CategoryDocument, ParseError, generation_metadata, read_file, write_file
from execution.comparison import build_psi, quasi_iso_check, verify_chain_map
from execution.config import RunConfig, coefficient_characteristic
from execution.errors import FlowToolsError
from execution.flowcat import d_squared_report, homology as integral_homology, homology_ranks_over
from execution.flowcat import validate as validate_category
from execution.models.flow_data import ComparisonData
from execution.models.report import Report
from execution.morse_numeric import build_flow_category, find_critical_points, mixed_moduli, trajectory_dump
from execution.realize import homotopy_chain_check, realize as realize_category, to_dot
from execution.spectral import build_E1, collapse_check, ordinary, turn_page, two_line
from execution.surfaces import SurfaceSpec, UnknownExample, surface_by_name, surface_from_dict

load_dotenv()

logger = logging.getLogger(__name__)

GENERATION_EXIT = 3
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
SCHEMA_PATH = Path(__file__).resolve().parent.parent / "docs" / "category_file.schema.json"


def _exit_on_errors(func):
    """Map FlowToolsError to its exit code after logging it."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except FlowToolsError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            sys.exit(e.exit_code)
    return wrapper


def _coeffs_callback(ctx, param, value):
    if value is None:
        value = RunConfig.from_env().coeffs
    try:
        coefficient_characteristic(value)
    except ValueError as e:
        raise click.BadParameter(str(e))
    return value


def _field_name(characteristic: int) -> str:
    return "Q" if characteristic == 0 else f"F{characteristic}"


def _safe_name(name: str) -> str:
    return re.sub(r'[^A-Za-z0-9_.+-]+', '_', name) or "category"


def _checked(document: CategoryDocument) -> Report:
    """validate, then the ∂² report when the structure is sound."""
    report = validate_category(document.category)
    if report.passed:
        report.extend(d_squared_report(document.category))
    if document.comparison is not None:
        target = validate_category(document.comparison.target)
        if target.passed:
            target.extend(d_squared_report(document.comparison.target))
        report.extend(target)
    return report


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, 'w', encoding='utf-8') as handle:
            handle.write(text)
        logger.info(f"Wrote {out}")
    else:
        click.echo(text, nl=False)


@click.group()
@click.option('--log-level', default=None, help='DEBUG, INFO, WARNING or ERROR (default: $LOG_LEVEL or INFO)')
def cli(log_level):
    """Flow categories: generation, homology, spectral sequences and CW realization."""
    level = (log_level or os.getenv('LOG_LEVEL', 'INFO')).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)


@cli.command()
@click.argument('path', type=click.Path())
@click.option('--format', 'fmt', type=click.Choice(['text', 'json']), default='text')
@_exit_on_errors
def validate(path, fmt):
    """Exit 0 if validate and the ∂² checks pass, 1 otherwise."""
    report = _checked(read_file(path))
    if fmt == 'json':
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(str(report))
    sys.exit(0 if report.passed else 1)


@cli.command()
@click.argument('path', type=click.Path())
@click.option('--coeffs', default=None, callback=_coeffs_callback, help='Z, Q or Fp:p (default: $FLOWCAT_COEFFS or Z)')
@click.option('--format', 'fmt', type=click.Choice(exporters.FORMATS), default='text')
@click.option('--out', default=None, help='Write the table to this file instead of stdout')
@_exit_on_errors
def homology(path, coeffs, fmt, out):
    """Per-degree homology table of a category file."""
    document = read_file(path)
    report = _checked(document)
    if not report.passed:
        click.echo(str(report), err=True)
        sys.exit(1)
    characteristic = coefficient_characteristic(coeffs)
    if characteristic is None:
        frame = exporters.homology_frame(integral_homology(document.category))
    else:
        ranks = homology_ranks_over(document.category, characteristic)
        frame = exporters.field_homology_frame(ranks, _field_name(characteristic))
    _emit(exporters.render(frame, fmt), out)


@cli.command()
@click.argument('path', type=click.Path())
@click.option('--coeffs', default='Q', callback=_coeffs_callback, help='Q or Fp:p (Z is read as Q)')
@click.option('--theory', type=click.Choice(['ordinary', 'toy']), default='ordinary')
@click.option('--gap', default=3, show_default=True, help='Second row of the toy theory')
@click.option('--shift', default=0, show_default=True, help='Added to the filtration degree p')
@click.option('--format', 'fmt', type=click.Choice(exporters.FORMATS), default='text')
@click.option('--out', default=None)
@_exit_on_errors
def spectral(path, coeffs, theory, gap, shift, fmt, out):
    """E1 and E2 pages; for ordinary coefficients also the collapse check."""
    document = read_file(path)
    report = _checked(document)
    if not report.passed:
        click.echo(str(report), err=True)
        sys.exit(1)
    characteristic = coefficient_characteristic(coeffs)
    if characteristic is None:
        logger.warning("Spectral pages need field coefficients; using Q for Z")
        characteristic = 0
    if document.category.mod2_mode and characteristic != 2:
        logger.warning("mod2 category: using F2")
        characteristic = 2
    coefficient_theory = ordinary(characteristic) if theory == 'ordinary' else two_line(characteristic, gap)

    e1 = build_E1(document.category, coefficient_theory, shift)
    e2 = turn_page(e1)
    sections = [
        ("E1", exporters.pages_table(e1), True),
        ("E2", exporters.pages_table(e2), True),
    ]
    passed = True
    if coefficient_theory.is_ordinary:
        collapse = collapse_check(document.category, coefficient_theory)
        passed = collapse.passed
        sections.append(("collapse", exporters.report_frame(collapse), False))
    _emit(exporters.render_many(sections, fmt), out)
    sys.exit(0 if passed else 1)


def _resolve_surface(name: str) -> SurfaceSpec:
    if name.endswith('.json') and os.path.exists(name):
        try:
            with open(name, 'r', encoding='utf-8') as handle:
                data = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            raise ParseError(f"Cannot read spec file {name}: {e}")
        if not isinstance(data, dict):
            raise ParseError(f"Spec file {name} must hold an object")
        return surface_from_dict(data)
    return surface_by_name(name)


@cli.command()
@click.argument('example')
@click.option('--compare', 'compare_with', default=None, help='Second example on the same manifold')
@click.option('--seed', type=int, default=None)
@click.option('--jobs', type=int, default=None)
@click.option('--out', default=None, help='Output directory (default: $FLOWCAT_OUT_DIR or tmp)')
@click.option('--tol-crit', type=float, default=None)
@click.option('--tol-nondeg', type=float, default=None)
@click.option('--delta-arrive', type=float, default=None)
@click.option('--tol-merge', type=float, default=None)
@click.option('--bisection-depth', type=int, default=None)
@click.option('--max-steps', type=int, default=None)
def generate(example, compare_with, seed, jobs, out, tol_crit, tol_nondeg, delta_arrive, tol_merge,
             bisection_depth, max_steps):
    """Generate the category file (and trajectory dumps) of EXAMPLE."""
    try:
        config = RunConfig.from_env(
            seed=seed, jobs=jobs, out_dir=out, tol_crit=tol_crit, tol_nondeg=tol_nondeg,
            delta_arrive=delta_arrive, tol_merge=tol_merge, bisection_depth=bisection_depth,
            max_steps=max_steps,
        )
        config.validate()
    except ValueError as e:
        raise click.UsageError(str(e))

    try:
        surface = _resolve_surface(example)
        target_surface = _resolve_surface(compare_with) if compare_with else None
    except (UnknownExample, ParseError) as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(2)
    except FlowToolsError as e:
        logger.error(f"Generation failed: {type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        sys.exit(GENERATION_EXIT)

    tolerances = config.tolerances()
    trajectories = {}
    try:
        points = find_critical_points(surface, tolerances, config.seed)
        category = build_flow_category(surface, tolerances, config.jobs, trajectories, config.seed, points)
        comparison = None
        metadata = generation_metadata(surface.describe(), config.to_dict(), points)
        if target_surface is not None:
            target_points = find_critical_points(target_surface, tolerances, config.seed)
            target = build_flow_category(target_surface, tolerances, config.jobs, trajectories,
                                         config.seed, target_points)
            mixed = mixed_moduli(surface, target_surface, points, target_points, tolerances,
                                 config.jobs, trajectories)
            comparison = ComparisonData(category, target, mixed)
            metadata['comparison_surface'] = target_surface.describe()
    except FlowToolsError as e:
        logger.error(f"Generation failed: {type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        sys.exit(GENERATION_EXIT)

    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, f"{_safe_name(surface.name)}.json")
    write_file(path, CategoryDocument(category, comparison, metadata))
    trajectory_dump(trajectories, os.path.join(config.out_dir, f"{_safe_name(surface.name)}_trajectories"))
    click.echo(path)


@cli.command()
@click.argument('path', type=click.Path())
@click.option('--format', 'fmt', type=click.Choice(['text', 'json']), default='text')
@_exit_on_errors
def compare(path, fmt):
    """Chain-map and quasi-isomorphism verdicts for the comparison block."""
    document = read_file(path)
    if document.comparison is None:
        click.echo(f"Error: {path} has no comparison block", err=True)
        sys.exit(2)
    report = _checked(document)
    if report.passed:
        psi = build_psi(document.comparison)
        chain_map = verify_chain_map(document.comparison, psi)
        report.extend(chain_map)
        if chain_map.passed:
            report.extend(quasi_iso_check(document.comparison, psi))
    if fmt == 'json':
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(str(report))
    sys.exit(0 if report.passed else 1)


@cli.command()
@click.argument('path', type=click.Path())
@click.option('--shift', type=int, default=None, help='Suspension L (default: $FLOWCAT_SHIFT or p − q)')
@click.option('--format', 'fmt', type=click.Choice(exporters.FORMATS), default='text')
@click.option('--out', default=None, help='Directory for the DOT file (default: $FLOWCAT_OUT_DIR or tmp)')
@_exit_on_errors
def realize(path, shift, fmt, out):
    """Cell table of the CW realization plus a DOT attaching diagram."""
    config = RunConfig.from_env(shift=shift, out_dir=out)
    document = read_file(path)
    report = _checked(document)
    if not report.passed:
        click.echo(str(report), err=True)
        sys.exit(1)
    cw = realize_category(document.category, config.shift)
    chain = homotopy_chain_check(document.category)

    os.makedirs(config.out_dir, exist_ok=True)
    dot_path = os.path.join(config.out_dir, f"{_safe_name(document.category.name)}.dot")
    with open(dot_path, 'w', encoding='utf-8') as handle:
        handle.write(to_dot(cw))
    logger.info(f"Wrote {dot_path}")

    click.echo(exporters.render_many([
        (f"cells (L={cw.shift}, q={cw.base_index})", exporters.cells_frame(cw), False),
        ("attaching", exporters.report_frame(chain), False),
    ], fmt), nl=False)
    sys.exit(0 if chain.passed else 1)


@cli.command()
def schema():
    """Print the JSON schema of category files."""
    click.echo(SCHEMA_PATH.read_text(encoding='utf-8'), nl=False)


if __name__ == "__main__":
    cli()
