"""The rdprofile command line.

Each command reads its inputs from, and writes its results to, an output
directory, so the commands can be run one after another or all at once by the
``pipeline`` command. Every JSON file written embeds the effective
configuration.
"""
from __future__ import annotations

# ruff: noqa: FBT002, B008

import logging
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING, Annotated

import numpy as np
import pandas as pd
from typer import Argument, Exit, Option, Typer

from . import (
    classify, compression, features, netsim, reduce, reporting, store,
    timeseries)
from .compression import Algorithm, ErrorBudget
from .config import EnergyConfig, PipelineConfig, load_config
from .errors import (
    DegenerateDataError, InputError, RdProfileError, UnreadableInputError)
from .header import generate_header_panel
from .reporting import Reporter
from .timeseries import SampleEncoding, SignalClass, TimeSeriesWindow

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

log = logging.getLogger(__name__)

app = Typer(
    help='Rate-distortion profiling of sensor time series.',
    no_args_is_help=True, add_completion=False)

WINDOWS_FILE = 'windows.csv'
MATRIX_FILE = 'features.csv'
SELECTION_FILE = 'selection.json'
BOOTSTRAP_MODEL_FILE = 'model_svm_selected.json'

# Distortion values shown in the rate summary table.
SUMMARY_DISTORTIONS = (1.0, 2.0, 4.0, 8.0)

ConfigOpt = Annotated[Path | None, Option(
    '--config', help='A TOML configuration file.')]
OutOpt = Annotated[Path, Option(
    '--out', help='The directory for inputs and results.')]
SeedOpt = Annotated[int | None, Option(
    '--seed', min=0, help='Random seed, overriding the configuration.')]
WindowLenOpt = Annotated[int | None, Option(
    '--window-len', min=2, help='Samples per window.')]
FoldsOpt = Annotated[int | None, Option(
    '--folds', min=2, help='Cross-validation folds.')]
KOpt = Annotated[int | None, Option(
    '--k', min=1, help='The number of features to select.')]
JobsOpt = Annotated[int | None, Option(
    '--jobs', help='Parallel worker processes (joblib n_jobs).')]
VerboseOpt = Annotated[bool, Option(
    '--verbose', '-v', help='Show debug logging.')]
QuietOpt = Annotated[bool, Option(
    '--quiet', '-q', help='Only show warnings and errors.')]
AlgorithmOpt = Annotated[str, Option(
    '--algorithm', help='Compressor: ltc, dct or both.')]
ClassifierOpt = Annotated[str, Option(
    '--classifier', help='Classifier: svm or ffnn.')]
FeaturesOpt = Annotated[str, Option(
    '--features',
    help='Feature set: all, selected, pca:<L>, selected-pca:<L> or grid.')]


@dataclass
class Run:
    """The context of one command run."""

    command: str
    config: PipelineConfig
    out: Path
    reporter: Reporter

    def path(self, name: str) -> Path:
        """A path within the output directory."""
        return self.out / name

    def metadata(self, **extra) -> dict:
        """Common JSON sidecar content."""
        return {'command': self.command, 'config': self.config.to_dict(),
                **extra}

    @property
    def encoding(self) -> SampleEncoding:
        """The configured sample encoding."""
        return SampleEncoding(self.config.bits_per_sample)


@contextmanager
def command_run(
        command: str, *, config_path: Path | None, out: Path,
        verbose: bool = False, quiet: bool = False,
        **overrides) -> Iterator[Run]:
    """Set up reporting and configuration, and handle errors, for a command.

    Errors derived from `RdProfileError` are shown as a short panel and end
    the program with the error's exit code. Anything else is an internal
    error, shown with a full traceback and exit code 1.
    """
    verbosity = 'verbose' if verbose else 'quiet' if quiet else 'normal'
    reporter = Reporter(verbosity)
    reporter.setup_logging()
    try:
        config = load_config(config_path, **overrides)
        if not quiet:
            reporter.console.print(
                generate_header_panel(command, config, out))
        out.mkdir(parents=True, exist_ok=True)
        yield Run(command, config, out, reporter)
    except RdProfileError as exc:
        reporter.progress.stop()
        reporter.console.print(reporting.format_error(exc))
        raise Exit(exc.exit_code) from None
    except Exception as exc:                                  # noqa: BLE001
        reporter.progress.stop()
        reporter.console.print(reporting.format_internal_error(exc))
        raise Exit(1) from None
    else:
        reporter.finish()


def _chunks(items: Sequence, size: int) -> Iterator[Sequence]:
    for i in range(0, len(items), size):
        yield items[i:i + size]


# Ingestion.
def _parse_input(text: str) -> tuple[SignalClass | None, Path]:
    """Split a ``[CLASS=]PATH`` argument."""
    prefix, sep, rest = text.partition('=')
    if sep:
        try:
            return SignalClass.parse(prefix), Path(rest)
        except InputError:
            pass
    return None, Path(text)


def do_ingest(run: Run, inputs: Sequence[str]) -> list[TimeSeriesWindow]:
    """Load CSV inputs, or generate the synthetic corpus when there are none.

    Writes ``windows.csv``.
    """
    cfg = run.config
    sources = []
    windows: list[TimeSeriesWindow] = []
    if inputs:
        with run.reporter.stage('Ingest', total=len(inputs)) as stage:
            for text in inputs:
                label, path = _parse_input(text)
                result = timeseries.load_csv(
                    path, cfg.window_len, class_label=label)
                windows.extend(result.windows)
                sources.append({
                    'path': str(path),
                    'class': label.label if label else '',
                    'windows': len(result.windows),
                    'dropped_windows': result.dropped_windows,
                    'discarded_samples': result.discarded_samples,
                    'header': result.header or '',
                })
                stage.advance(text=path.name)
    else:
        total = cfg.synthetic_per_class * len(SignalClass)
        with run.reporter.stage('Generate', total=total) as stage:
            for cls in SignalClass:
                windows.extend(timeseries.gen_corpus(
                    cfg.synthetic_per_class, cfg.window_len, cfg.seed,
                    cfg.generator, classes=(cls,)))
                stage.advance(cfg.synthetic_per_class, text=cls.label)
        sources.append({
            'path': 'synthetic', 'windows': len(windows),
            'dropped_windows': 0, 'discarded_samples': 0})

    timeseries.write_windows(
        run.path(WINDOWS_FILE), windows, **run.metadata(sources=sources))
    dropped = sum(s['dropped_windows'] for s in sources)
    log.info(
        'Stored %d windows (%d dropped) in %s', len(windows), dropped,
        run.path(WINDOWS_FILE))
    return windows


def _read_windows(run: Run, path: Path | None) -> list[TimeSeriesWindow]:
    path = path or run.path(WINDOWS_FILE)
    if not path.exists():
        msg = f'{path} not found; run the ingest command first'
        raise UnreadableInputError(msg)
    return timeseries.read_windows(path)


# Rate-distortion analysis.
def _algorithms(text: str) -> list[Algorithm]:
    if text.strip().lower() == 'both':
        return list(Algorithm)
    try:
        return [Algorithm(text.strip().lower())]
    except ValueError:
        msg = f'Unknown algorithm {text!r}, expected ltc, dct or both'
        raise InputError(msg) from None


def _curve_path(run: Run, algorithm: Algorithm, label: str) -> Path:
    return run.path(f'rd_{algorithm.value}_{label}.csv')


def do_rd(
        run: Run, windows: Sequence[TimeSeriesWindow],
        algorithms: Sequence[Algorithm],
    ) -> dict[Algorithm, dict[str, compression.RdCurve]]:
    """Sweep every labelled window and average the curves by class.

    Writes ``rd_<alg>_<class>.csv``, the classless ``rd_<alg>_all.csv`` and
    the per-window curves ``rd_<alg>_windows.csv``.
    """
    cfg = run.config
    labelled = [w for w in windows if w.class_label is not None]
    if not labelled:
        msg = 'Rate-distortion analysis needs labelled windows'
        raise InputError(msg)
    if len(labelled) < len(windows):
        log.warning(
            'Skipping %d unlabelled windows', len(windows) - len(labelled))
    budgets = [ErrorBudget(e) for e in cfg.eps_grid]
    grid = compression.default_average_grid(
        cfg.average_grid_step, cfg.average_grid_max)

    results = {}
    for algorithm in algorithms:
        name = f'RD sweep {algorithm.value}'
        curves: list[compression.RdCurve] = []
        with run.reporter.stage(name, total=len(labelled)) as stage:
            for chunk in _chunks(labelled, 50):
                curves.extend(compression.sweep_windows(
                    chunk, algorithm, budgets, run.encoding,
                    n_jobs=cfg.n_jobs))
                stage.advance(len(chunk))

        per_class = compression.class_curves(curves, grid)
        classless = compression.classless_curve(per_class, grid)
        by_label = {c.label: c for c in per_class.values()}
        by_label['all'] = classless
        for label, curve in by_label.items():
            compression.write_curve(
                _curve_path(run, algorithm, label), curve, **run.metadata())
        rows = [
            {'source_id': w.source_id, 'label': c.label,
             'distortion_pct': p.distortion_pct, 'rate': p.rate}
            for w, c in zip(labelled, curves) for p in c.points]
        store.write_table(
            run.path(f'rd_{algorithm.value}_windows.csv'), pd.DataFrame(rows))
        run.reporter.print(reporting.format_curves_table(
            list(by_label.values()), SUMMARY_DISTORTIONS))
        results[algorithm] = by_label
    return results


# Features.
def do_features(
        run: Run, windows: Sequence[TimeSeriesWindow],
    ) -> features.SignalFeatureMatrix:
    """Build and normalize the feature matrix.

    Writes ``features.csv`` and the PCA scatter data ``pca_scatter.csv``.
    """
    cfg = run.config
    if cfg.bank_version != features.BANK_VERSION:
        msg = (
            f'Unsupported feature bank {cfg.bank_version!r}, this version'
            f' provides {features.BANK_VERSION!r}')
        raise InputError(msg)
    with run.reporter.stage('Features') as stage:
        stage.describe(f'{len(windows)} windows')
        matrix = features.normalize(
            features.build_matrix(windows, n_jobs=cfg.n_jobs))
    features.write_matrix(run.path(MATRIX_FILE), matrix, **run.metadata())
    log.info('Feature matrix: %d rows, %d features', *matrix.shape)
    _write_pca_scatter(run, matrix)
    return matrix


def _write_pca_scatter(
        run: Run, matrix: features.SignalFeatureMatrix) -> None:
    if min(matrix.shape) < 2:
        log.warning('Feature matrix too small for a PCA scatter')
        return
    try:
        model = reduce.pca_fit(matrix, 2)
    except DegenerateDataError as exc:
        log.warning('No PCA scatter: %s', exc)
        return
    scores = reduce.pca_transform(model, matrix)
    table = pd.DataFrame({
        'source_id': matrix.source_ids,
        'label': [lbl.label if lbl else '' for lbl in matrix.labels],
        'pc1': scores[:, 0],
        'pc2': scores[:, 1],
    })
    store.write_table(run.path('pca_scatter.csv'), table)
    store.write_json(run.path('pca_scatter.json'), run.metadata(
        explained_ratio=model.explained_ratio,
        components=model.components,
        feature_names=matrix.feature_names))


def _read_matrix(
        run: Run, path: Path | None) -> features.SignalFeatureMatrix:
    path = path or run.path(MATRIX_FILE)
    if not path.exists():
        msg = f'{path} not found; run the features command first'
        raise UnreadableInputError(msg)
    return features.read_matrix(path)


# Feature selection.
def do_select(
        run: Run, matrix: features.SignalFeatureMatrix,
    ) -> reduce.SelectionResult:
    """Run greedy forward selection. Writes ``selection.json``."""
    cfg = run.config
    k = cfg.selection_k
    if k > matrix.shape[1]:
        log.warning(
            'Only %d features available, selecting all of them',
            matrix.shape[1])
        k = matrix.shape[1]
    with run.reporter.stage('Selection', total=k) as stage:
        def on_step(_step, index, acc):
            stage.advance(text=f'{matrix.feature_names[index]} {acc:.3f}')

        result = reduce.greedy_select(
            matrix, k, cfg.folds, cfg.seed, c=cfg.svm_c, n_jobs=cfg.n_jobs,
            on_step=on_step)
    reduce.write_selection(
        run.path(SELECTION_FILE), result, **run.metadata(k=k))
    run.reporter.print(reporting.format_selection_table(result))
    return result


def _read_selection(run: Run, path: Path | None) -> reduce.SelectionResult:
    path = path or run.path(SELECTION_FILE)
    if not path.exists():
        msg = f'{path} not found; run the select command first'
        raise UnreadableInputError(msg)
    return reduce.read_selection(path)


# Training and evaluation.
def _trainer(run: Run, name: str) -> classify.Trainer:
    cfg = run.config
    trainers = {
        'svm': lambda: classify.SvmTrainer(cfg.svm_c),
        'ffnn': lambda: classify.FfnnTrainer(
            cfg.ffnn_hidden, cfg.ffnn_epochs, cfg.ffnn_rate, cfg.seed),
    }
    factory = trainers.get(name.strip().lower())
    if factory is None:
        msg = f'Unknown classifier {name!r}, expected svm or ffnn'
        raise InputError(msg)
    return factory()


@dataclass(frozen=True)
class FeatureSet:
    """A parsed ``--features`` value."""

    base: str
    pca: int = 0

    @classmethod
    def parse(cls, text: str) -> FeatureSet:
        """Parse 'all', 'selected', 'pca:L' or 'selected-pca:L'."""
        name, _, count = text.strip().lower().partition(':')
        bases = {'all': 'all', 'selected': 'selected', 'pca': 'all',
                 'selected-pca': 'selected'}
        if name not in bases or bool(count) != name.endswith('pca'):
            msg = f'Unknown feature set {text!r}'
            raise InputError(msg)
        try:
            pca = int(count) if count else 0
        except ValueError:
            msg = f'Bad PCA component count in {text!r}'
            raise InputError(msg) from None
        if count and pca < 1:
            msg = f'PCA component count must be >= 1 in {text!r}'
            raise InputError(msg)
        return cls(bases[name], pca)

    def __str__(self) -> str:
        if not self.pca:
            return self.base
        prefix = 'pca' if self.base == 'all' else 'selected-pca'
        return f'{prefix}:{self.pca}'

    def columns(
            self, matrix: features.SignalFeatureMatrix,
            selection: reduce.SelectionResult | None,
        ) -> features.SignalFeatureMatrix:
        """The feature columns this set starts from."""
        if self.base == 'all':
            return matrix
        if selection is None:
            msg = 'Selected features requested but no selection is available'
            raise InputError(msg)
        return matrix.select_columns(
            matrix.column_indices(selection.feature_names))

    def data(
            self, matrix: features.SignalFeatureMatrix,
            selection: reduce.SelectionResult | None) -> np.ndarray:
        """The training data for this feature set."""
        base = self.columns(matrix, selection)
        if not self.pca:
            return base.values
        model = reduce.pca_fit(base, self.pca)
        return reduce.pca_transform(model, base)


def _grid(run: Run, matrix, selection) -> list[tuple[str, FeatureSet]]:
    pca_max = run.config.pca_max
    grid = [('svm', FeatureSet('all')), ('ffnn', FeatureSet('all'))]
    grid += [
        ('svm', FeatureSet('all', L))
        for L in range(1, min(pca_max, *matrix.shape) + 1)]
    if selection is not None:
        k = len(selection.selected_indices)
        grid += [
            ('svm', FeatureSet('selected')),
            ('ffnn', FeatureSet('selected'))]
        grid += [
            ('svm', FeatureSet('selected', L))
            for L in range(1, min(pca_max, k, matrix.shape[0]) + 1)]
    return grid


def do_train_eval(
        run: Run, matrix: features.SignalFeatureMatrix, classifier: str,
        feature_set: str, selection: reduce.SelectionResult | None,
    ) -> dict[str, classify.CvReport]:
    """Cross-validate one classifier and feature set, or the full grid.

    Writes ``accuracy_<tag>.csv`` and ``.json``. For classifiers trained on
    plain (not PCA) features the model trained on all rows is saved as
    ``model_<classifier>_<features>.json``.
    """
    cfg = run.config
    labels = matrix.label_array()
    if feature_set.strip().lower() == 'grid':
        runs = _grid(run, matrix, selection)
        tag = 'grid'
    else:
        fs = FeatureSet.parse(feature_set)
        runs = [(classifier.strip().lower(), fs)]
        tag = f'{runs[0][0]}_{str(fs).replace(":", "")}'

    reports: dict[str, classify.CvReport] = {}
    with run.reporter.stage('Cross-validation', total=len(runs)) as stage:
        for clf_name, fs in runs:
            name = f'{clf_name}/{fs}'
            stage.advance(0, text=name)
            trainer = _trainer(run, clf_name)
            reports[name] = classify.cross_validate(
                trainer, fs.data(matrix, selection), labels, cfg.folds,
                cfg.seed, n_jobs=cfg.n_jobs)
            log.info('%s accuracy %.4f', name, reports[name].accuracy)
            stage.advance()
            if not fs.pca:
                _save_model(run, matrix, selection, clf_name, fs)

    rows = [
        {'configuration': name, 'classifier': r.classifier,
         'features': name.partition('/')[2], 'n_features': r.n_features,
         'accuracy': r.accuracy,
         **{f'accuracy_{c}': a for c, a in r.class_accuracy.items()}}
        for name, r in reports.items()]
    store.write_table(run.path(f'accuracy_{tag}.csv'), pd.DataFrame(rows))
    store.write_json(run.path(f'accuracy_{tag}.json'), run.metadata(
        reports={name: r.to_dict() for name, r in reports.items()}))
    run.reporter.print(reporting.format_accuracy_table(reports))
    return reports


def _save_model(
        run: Run, matrix: features.SignalFeatureMatrix,
        selection: reduce.SelectionResult | None, clf_name: str,
        fs: FeatureSet) -> Path:
    base = fs.columns(matrix, selection)
    model = _trainer(run, clf_name).train(base.values, base.label_array())
    path = run.path(f'model_{clf_name}_{fs}.json')
    params = base.normalization
    return classify.save_model(path, model, **run.metadata(
        feature_names=list(base.feature_names),
        bank_version=base.bank_version,
        normalization=params.to_dict() if params else None))


# Network simulation.
def _load_curves(run: Run) -> netsim.CurveSet:
    classless_path = _curve_path(run, Algorithm.DCT, 'all')
    if not classless_path.exists():
        msg = f'{classless_path} not found; run the rd command for dct first'
        raise UnreadableInputError(msg)
    per_class = {}
    for cls in SignalClass:
        path = _curve_path(run, Algorithm.DCT, cls.label)
        if path.exists():
            per_class[cls] = compression.read_curve(path)
    return netsim.CurveSet(per_class, compression.read_curve(classless_path))


def do_simulate(
        run: Run, scenario_path: Path | None, model_path: Path | None,
    ) -> list[netsim.ReportPeriodResult]:
    """Run the network simulation.

    Writes ``simulation.csv`` with its JSON sidecar of aggregates and the
    plot data ``simulation_summary.csv``.
    """
    cfg = run.config
    curves = _load_curves(run)
    if scenario_path is not None:
        scenario = netsim.load_scenario(scenario_path)
    else:
        scenario = netsim.default_scenario(
            cfg.nodes_per_class, cfg.xi_grid, assign=model_path is None)
    energy = EnergyConfig.from_mapping(
        {**cfg.energy.to_dict(), **scenario.energy})
    if energy.bits_per_sample != curves.classless.encoding.bits_per_sample:
        msg = 'The energy and curve sample encodings differ'
        raise InputError(msg)

    source = netsim.WindowSource(curves.n_samples, cfg.seed, cfg.generator)
    if model_path is not None:
        model, meta = classify.load_model(model_path)
        params = meta.get('normalization')
        if not params:
            msg = f'{model_path}: the model has no normalization parameters'
            raise InputError(msg)
        nodes = netsim.classify_nodes(
            scenario.nodes, source, model, meta['feature_names'],
            features.NormalizationParams.from_dict(params))
        correct = sum(n.assigned_class is n.true_class for n in nodes)
        log.info('Sink classified %d of %d nodes correctly', correct,
                 len(nodes))
        scenario = replace(scenario, nodes=tuple(nodes))

    with run.reporter.stage('Simulation') as stage:
        stage.describe(
            f'{len(scenario.nodes)} nodes, {len(scenario.strategies)}'
            f' strategies, {len(scenario.xi_grid)} tolerances')
        results = netsim.simulate(
            scenario, curves, energy, cfg.seed, generator=cfg.generator,
            n_jobs=cfg.n_jobs)

    path = netsim.write_results(
        run.path('simulation.csv'), results, **run.metadata(
            energy=energy.to_dict(),
            report_period_s=netsim.report_period_s(curves.n_samples, energy),
            nodes=[{
                'id': n.node_id, 'class': n.true_class.label,
                'assigned_class': (
                    n.assigned_class.label if n.assigned_class else '')}
                for n in scenario.nodes]))
    summary = netsim.aggregate(results)
    store.write_table(run.path('simulation_summary.csv'), summary)
    log.info('Wrote %s', path)
    run.reporter.print(reporting.format_simulation_table(summary))
    return results


# Commands.
@app.command()
def ingest(
        inputs: Annotated[list[str] | None, Argument(
            help='CSV files, each optionally prefixed by CLASS=. Without'
                 ' inputs a synthetic corpus is generated.')] = None,
        config: ConfigOpt = None, out: OutOpt = Path('out'),
        seed: SeedOpt = None, window_len: WindowLenOpt = None,
        verbose: VerboseOpt = False, quiet: QuietOpt = False,
    ):
    """Split input series into windows and store them."""
    with command_run(
            'ingest', config_path=config, out=out, verbose=verbose,
            quiet=quiet, seed=seed, window_len=window_len) as run:
        do_ingest(run, inputs or [])


@app.command()
def rd(
        algorithm: AlgorithmOpt = 'both',
        windows: Annotated[Path | None, Option(
            help='Window store; by default windows.csv in --out.')] = None,
        config: ConfigOpt = None, out: OutOpt = Path('out'),
        jobs: JobsOpt = None,
        verbose: VerboseOpt = False, quiet: QuietOpt = False,
    ):
    """Compute per-window and class average rate-distortion curves."""
    with command_run(
            'rd', config_path=config, out=out, verbose=verbose, quiet=quiet,
            n_jobs=jobs) as run:
        do_rd(run, _read_windows(run, windows), _algorithms(algorithm))


@app.command(name='features')
def features_command(
        windows: Annotated[Path | None, Option(
            help='Window store; by default windows.csv in --out.')] = None,
        config: ConfigOpt = None, out: OutOpt = Path('out'),
        jobs: JobsOpt = None,
        verbose: VerboseOpt = False, quiet: QuietOpt = False,
    ):
    """Extract, filter and normalize the feature matrix."""
    with command_run(
            'features', config_path=config, out=out, verbose=verbose,
            quiet=quiet, n_jobs=jobs) as run:
        do_features(run, _read_windows(run, windows))


@app.command()
def select(
        matrix: Annotated[Path | None, Option(
            help='Feature matrix; by default features.csv in --out.')] = None,
        config: ConfigOpt = None, out: OutOpt = Path('out'),
        seed: SeedOpt = None, k: KOpt = None, folds: FoldsOpt = None,
        jobs: JobsOpt = None,
        verbose: VerboseOpt = False, quiet: QuietOpt = False,
    ):
    """Greedy forward feature selection."""
    with command_run(
            'select', config_path=config, out=out, verbose=verbose,
            quiet=quiet, seed=seed, selection_k=k, folds=folds,
            n_jobs=jobs) as run:
        do_select(run, _read_matrix(run, matrix))


@app.command(name='train-eval')
def train_eval(
        classifier: ClassifierOpt = 'svm', feature_set: FeaturesOpt = 'all',
        matrix: Annotated[Path | None, Option(
            help='Feature matrix; by default features.csv in --out.')] = None,
        selection: Annotated[Path | None, Option(
            help='Selection result; by default selection.json in --out.',
        )] = None,
        config: ConfigOpt = None, out: OutOpt = Path('out'),
        seed: SeedOpt = None, folds: FoldsOpt = None, jobs: JobsOpt = None,
        verbose: VerboseOpt = False, quiet: QuietOpt = False,
    ):
    """Cross-validate classifiers on a feature set."""
    with command_run(
            'train-eval', config_path=config, out=out, verbose=verbose,
            quiet=quiet, seed=seed, folds=folds, n_jobs=jobs) as run:
        selected = None
        needs_selection = feature_set.strip().lower() == 'grid' \
            or feature_set.strip().lower().startswith('selected')
        if needs_selection:
            path = selection or run.path(SELECTION_FILE)
            if path.exists() or feature_set.strip().lower() != 'grid':
                selected = _read_selection(run, path)
        do_train_eval(
            run, _read_matrix(run, matrix), classifier, feature_set,
            selected)


@app.command()
def simulate(
        scenario: Annotated[Path | None, Option(
            help='JSON scenario; by default nodes_per_class synthetic'
                 ' nodes of each class.')] = None,
        model: Annotated[Path | None, Option(
            help='Saved classifier used by the sink to classify nodes.',
        )] = None,
        config: ConfigOpt = None, out: OutOpt = Path('out'),
        seed: SeedOpt = None, jobs: JobsOpt = None,
        verbose: VerboseOpt = False, quiet: QuietOpt = False,
    ):
    """Simulate report period energy and distortion per strategy."""
    with command_run(
            'simulate', config_path=config, out=out, verbose=verbose,
            quiet=quiet, seed=seed, n_jobs=jobs) as run:
        do_simulate(run, scenario, model)


@app.command()
def pipeline(
        inputs: Annotated[list[str] | None, Argument(
            help='CSV files, each optionally prefixed by CLASS=. Without'
                 ' inputs a synthetic corpus is generated.')] = None,
        config: ConfigOpt = None, out: OutOpt = Path('out'),
        seed: SeedOpt = None, window_len: WindowLenOpt = None,
        k: KOpt = None, folds: FoldsOpt = None, jobs: JobsOpt = None,
        verbose: VerboseOpt = False, quiet: QuietOpt = False,
    ):
    """Run every stage: ingest, rd, features, select, train-eval, simulate.

    The simulation lets the sink classify the nodes with the SVM trained on
    the selected features.
    """
    with command_run(
            'pipeline', config_path=config, out=out, verbose=verbose,
            quiet=quiet, seed=seed, window_len=window_len, selection_k=k,
            folds=folds, n_jobs=jobs) as run:
        windows = do_ingest(run, inputs or [])
        do_rd(run, windows, list(Algorithm))
        matrix = do_features(run, windows)
        selection = do_select(run, matrix)
        do_train_eval(run, matrix, 'svm', 'grid', selection)
        do_simulate(run, None, run.path(BOOTSTRAP_MODEL_FILE))


def main() -> None:
    """Run the command line application."""
    app()
