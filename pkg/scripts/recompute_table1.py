#!/usr/bin/env python
"""Recompute simulation study metrics from the per-replicate CSV written by ``gtiming bench table1``.

Deliberately uses nothing from :mod:`gtiming.bench`, so it can be used to check the report.
"""
import click
import pandas as pd

from gtiming import dgp


def recompute(frame: pd.DataFrame, truth: float) -> pd.DataFrame:
    """Metrics per method, indexed by method in order of first appearance."""
    ok = frame.dropna(subset=['estimate', 'lo', 'hi']).assign(
        error=lambda f: f.estimate - truth,
        width=lambda f: f.hi - f.lo,
        covered=lambda f: (f.lo <= truth) & (truth <= f.hi),
    )
    grouped = ok.groupby('method', sort=False)
    metrics = pd.DataFrame({
        'bias': grouped.error.mean(),
        'mse': grouped.error.apply(lambda e: (e ** 2).mean()),
        'mean_ci_width': grouped.width.mean(),
        'coverage': grouped.covered.mean(),
        'n_ok': grouped.size(),
    }).reindex(frame.method.unique())
    metrics['pct_bias'] = 100 * metrics.bias.abs() / truth
    # The first method in the file is the reference
    metrics['rel_mse'] = metrics.mse / metrics.mse.iloc[0]
    metrics['n_failed'] = frame.groupby('method', sort=False).size() - metrics.n_ok.fillna(0)
    return metrics


@click.command()
@click.option('--scenario', type=click.IntRange(1, 2), default=1, show_default=True)
@click.option('--tau', type=float, default=15.0, show_default=True)
@click.option('--truth', type=float, default=None, help='Truth to score against. [default: exact value]')
@click.option('--reps', type=int, default=None, help='Only use the first REPS data sets.')
@click.argument('replicates', type=click.Path(exists=True, dir_okay=False))
def main(scenario, tau, truth, reps, replicates):
    frame = pd.read_csv(replicates, float_precision='round_trip')
    if reps is not None:
        frame = frame[frame.rep < reps]
    if truth is None:
        truth = dgp.truth_closed_form(dgp.scenario_params(scenario), 1, 1, tau)

    click.echo(f'truth = {truth:.12f}')
    click.echo(recompute(frame, truth).to_string(float_format=lambda x: f'{x:.10g}'))


if __name__ == '__main__':
    main()
