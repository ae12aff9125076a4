"""
Command line interface: ``wearclass {synth,extract,train,predict,eval,rank}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""
from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
import typing as typ
from dataclasses import replace

import pandas as pd
from tqdm import tqdm

from .config import PipelineConfig, load_config
from .dataset import WearDataset, extract_descriptors, read_descriptor_table
from .errors import ConfigError, DatasetError, MissingEdgesError, WearClassError
from .evaluation import EvalReport, WrapperRanking, monte_carlo_eval, wrapper_rank
from .imageio_utils import read_gray, write_frame, write_gray, write_json, write_mask
from .pipelines import DescriptorSet, Pipeline
from .preprocess import process_insert
from .shapefeat import shapefeat_names
from .synth import synthesize

__all__ = ['main', 'cmd_synth', 'cmd_extract', 'cmd_extract_images', 'cmd_train', 'cmd_predict', 'cmd_eval',
           'cmd_rank', 'EXIT_OK', 'EXIT_USAGE', 'EXIT_DATA', 'EXIT_INTERNAL']

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

IMAGE_PATTERNS = ('*.pgm', '*.png', '*.tif', '*.tiff', '*.bmp', '*.jpg')


class UsageError(Exception):
    pass


def _stamp(config: PipelineConfig) -> str:
    return f"config_hash={config.hash}"


def cmd_synth(out_dir: str, n_per_class: int, config: PipelineConfig) -> WearDataset:
    return synthesize(out_dir, n_per_class=n_per_class, seed=config.seed, config_hash=config.hash)


def cmd_extract(manifest: str, descriptor: str, out_csv: str, config: PipelineConfig,
                n_jobs: int = 1) -> int:
    """
    Compute one descriptor table for a manifest.

    Returns
    -------
        the number of records that failed; the table holds the others.
    """
    dataset = WearDataset.from_csv(manifest)
    frame, failures = extract_descriptors(dataset, descriptor, config, n_jobs=n_jobs,
                                          progress=logger.isEnabledFor(logging.INFO))
    write_frame(out_csv, frame, header_comment=f"{descriptor} {_stamp(config)}")
    logger.info("%d %s rows written to %s", len(frame), descriptor, out_csv)
    if failures:
        logger.error("%d record(s) failed", len(failures))
    return len(failures)


def cmd_extract_images(in_dir: str, out_dir: str, config: PipelineConfig) -> int:
    """
    Preprocess every insert image of ``in_dir``: per-edge crops and wear masks
    as PNG files plus a manifest of the masks.

    Returns
    -------
        the number of images that failed.
    """
    paths = sorted({p for pattern in IMAGE_PATTERNS for p in glob.glob(os.path.join(in_dir, pattern))})
    if not paths:
        raise UsageError(f"no images found in {in_dir}")
    rows = []
    failed = 0
    for path in tqdm(paths, desc='inserts', unit='image', disable=not logger.isEnabledFor(logging.INFO)):
        stem = os.path.splitext(os.path.basename(path))[0]
        try:
            edges = process_insert(read_gray(path), config.preprocess)
        except MissingEdgesError as exc:
            logger.warning("%s: %s", path, exc)
            failed += 1
            continue
        except (WearClassError, OSError) as exc:
            logger.error("%s: %s", path, exc)
            failed += 1
            continue
        for edge in edges:
            rid = f"{stem}_{edge.crop.side}"
            write_gray(os.path.join(out_dir, 'crops', f"{rid}.png"), edge.crop.image)
            if not edge.mask.any():
                logger.warning("%s: empty wear region on the %s edge, skipped", path, edge.crop.side)
                continue
            mask_path = f"masks/{rid}.png"
            write_mask(os.path.join(out_dir, mask_path), edge.mask)
            rows.append({'id': rid, 'image_path': mask_path, 'edge_side': edge.crop.side,
                         'completeness': edge.completeness, 'label': '', 'source_image': os.path.abspath(path)})
    frame = pd.DataFrame(rows, columns=['id', 'image_path', 'edge_side', 'completeness', 'label', 'source_image'])
    write_frame(os.path.join(out_dir, 'manifest.csv'), frame, header_comment=_stamp(config), index=False)
    logger.info("%d wear masks from %d images", len(rows), len(paths))
    return failed


def _descriptors(shape_csv: typ.Optional[str], contour_csv: typ.Optional[str]) -> DescriptorSet:
    shape = read_descriptor_table(shape_csv) if shape_csv else None
    contour = read_descriptor_table(contour_csv) if contour_csv else None
    return DescriptorSet.from_frames(shape, contour)


def _labeled(manifest: str, subset: str, binary: bool) -> WearDataset:
    dataset = WearDataset.from_csv(manifest).subset(subset)
    dataset.require_labels()
    return dataset.binarize() if binary else dataset


def cmd_train(manifest: str, shape_csv: typ.Optional[str], contour_csv: typ.Optional[str], out_json: str,
              config: PipelineConfig, subset: str = 'all', binary: bool = False) -> Pipeline:
    """
    Fit the configured pipeline on every labeled record and save it as JSON.
    """
    dataset = _labeled(manifest, subset, binary)
    data = _descriptors(shape_csv, contour_csv).select(dataset.ids)
    pipeline = Pipeline.from_config(config).fit(data, dataset.labels)
    document = pipeline.to_dict()
    document['config_hash'] = config.hash
    write_json(out_json, document)
    logger.info("%s model trained on %d records, saved to %s", pipeline.name, len(dataset), out_json)
    return pipeline


def cmd_predict(model_json: str, shape_csv: typ.Optional[str], contour_csv: typ.Optional[str],
                out_csv: str, manifest: typ.Optional[str] = None) -> pd.DataFrame:
    """
    Predict labels, and class distributions where the pipeline gives them.
    """
    with open(model_json, encoding='utf-8') as fp:
        document = json.load(fp)
    try:
        pipeline = Pipeline.from_dict(document)
    except (KeyError, ValueError, TypeError) as exc:
        raise WearClassError(f"{model_json}: invalid model document ({exc})") from exc
    data = _descriptors(shape_csv, contour_csv)
    if manifest is not None:
        data = data.select(WearDataset.from_csv(manifest).ids)
    frame = pd.DataFrame({'label': pipeline.predict(data)}, index=list(data.ids))
    frame.index.name = 'id'
    proba = pipeline.predict_proba(data)
    if proba is not None:
        for column, cls in enumerate(pipeline.classes):
            frame[f"p_{cls}"] = proba[:, column]
    write_frame(out_csv, frame, header_comment=_stamp(pipeline.config))
    return frame


def cmd_eval(manifest: str, shape_csv: typ.Optional[str], contour_csv: typ.Optional[str], out_dir: str,
             config: PipelineConfig, subset: str = 'all', binary: bool = False,
             ks: typ.Sequence[int] = ()) -> EvalReport:
    """
    Monte Carlo evaluation; writes ``report.json``, ``runs.csv`` and
    ``confusion.csv`` to ``out_dir``.
    """
    dataset = _labeled(manifest, subset, binary)
    data = _descriptors(shape_csv, contour_csv)
    report = monte_carlo_eval(dataset, data, config, ks=ks, subset=subset)
    write_json(os.path.join(out_dir, 'report.json'), report.to_dict())
    write_frame(os.path.join(out_dir, 'runs.csv'), report.to_frame(), header_comment=_stamp(config), index=False)
    write_frame(os.path.join(out_dir, 'confusion.csv'), report.confusion.to_frame(), header_comment=_stamp(config))
    print(f"{config.descriptor} ({subset}): mean accuracy {report.mean_accuracy:.4f} "
          f"over {len(report.runs)} runs")
    for k, value in report.sweep.items():
        print(f"  k={k}: {value:.4f}")
    return report


def cmd_rank(manifest: str, shape_csv: str, out_csv: str, config: PipelineConfig, subset: str = 'all',
             binary: bool = False) -> WrapperRanking:
    """
    Rank the ShapeFeat features by wrapper backward elimination.
    """
    dataset = _labeled(manifest, subset, binary)
    table = read_descriptor_table(shape_csv)
    names = shapefeat_names()
    missing = [n for n in names if n not in table.columns]
    if missing:
        raise DatasetError(f"{shape_csv} is not a ShapeFeat table, missing {', '.join(missing)}")
    data = DescriptorSet.from_frames(table[names]).select(dataset.ids)
    ranking = wrapper_rank(data.shape, dataset.labels, names, config.classifier,
                           repeats=config.eval.wrapper_repeats, frac=config.eval.frac, seed=config.seed)
    write_frame(out_csv, ranking.to_frame(), header_comment=_stamp(config), index=False)
    for rank, name in enumerate(ranking.ranking, start=1):
        print(f"{rank:2d}. {name}")
    return ranking


def _parse_ks(text: str) -> list[int]:
    try:
        ks = [int(k) for k in text.split(',') if k.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("k values must be >= 1")
    return ks


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='count', default=0, help="-v for info, -vv for debug output")
    common.add_argument('--config', help="TOML configuration file")
    common.add_argument('--seed', type=int, help="overrides the configured seed and WEARCLASS_SEED")

    labeled = argparse.ArgumentParser(add_help=False)
    labeled.add_argument('--manifest', required=True, help="manifest CSV with labels")
    labeled.add_argument('--subset', choices=('all', 'complete', 'incomplete'), default='all')
    labeled.add_argument('--binary', action='store_true', help="merge L and M into L before use")

    tables = argparse.ArgumentParser(add_help=False)
    tables.add_argument('--shapefeat', help="ShapeFeat descriptor CSV")
    tables.add_argument('--borchiz', help="B-ORCHIZ descriptor CSV")

    parser = argparse.ArgumentParser(prog='wearclass', description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', parents=[common], help="generate a synthetic labeled mask set")
    p.add_argument('--out', required=True)
    p.add_argument('--n-per-class', type=int, default=50)

    p = sub.add_parser('extract', parents=[common], help="preprocess insert images or compute descriptors")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--in', dest='in_dir', help="directory of insert images")
    source.add_argument('--manifest', help="manifest CSV of wear masks")
    p.add_argument('--descriptor', choices=('shapefeat', 'borchiz'), default='shapefeat')
    p.add_argument('--out', required=True, help="output directory (--in) or CSV (--manifest)")
    p.add_argument('--jobs', type=int, default=1)

    p = sub.add_parser('train', parents=[common, labeled, tables], help="fit and save a pipeline")
    p.add_argument('--descriptor', help="pipeline, overrides the configured one")
    p.add_argument('--out', required=True, help="model JSON")

    p = sub.add_parser('predict', parents=[common, tables], help="apply a saved pipeline")
    p.add_argument('--model', required=True)
    p.add_argument('--manifest', help="restrict predictions to these records")
    p.add_argument('--out', required=True)

    p = sub.add_parser('eval', parents=[common, labeled, tables], help="Monte Carlo evaluation")
    p.add_argument('--descriptor', help="pipeline, overrides the configured one")
    p.add_argument('--runs', type=int)
    p.add_argument('--frac', type=float)
    p.add_argument('--k', type=_parse_ks, default=[], help="co-transduction k values, e.g. 3,7,9,11")
    p.add_argument('--out', required=True, help="report directory")

    p = sub.add_parser('rank', parents=[common, labeled], help="wrapper ranking of ShapeFeat features")
    p.add_argument('--shapefeat', required=True)
    p.add_argument('--out', required=True)
    return parser


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if getattr(args, 'descriptor', None) and args.command in ('train', 'eval'):
        config = config.replace(descriptor=args.descriptor)
    if args.command == 'eval' and (args.runs is not None or args.frac is not None):
        changes = {k: v for k, v in (('runs', args.runs), ('frac', args.frac)) if v is not None}
        config = config.replace(eval=replace(config.eval, **changes))
    return config


def _run(args: argparse.Namespace) -> int:
    if args.command == 'synth':
        dataset = cmd_synth(args.out, args.n_per_class, _config(args))
        print(f"{len(dataset)} masks written to {args.out}")
        return EXIT_OK

    config = _config(args)
    if args.command == 'extract':
        if args.in_dir:
            failed = cmd_extract_images(args.in_dir, args.out, config)
        else:
            failed = cmd_extract(args.manifest, args.descriptor, args.out, config, n_jobs=args.jobs)
        return EXIT_DATA if failed else EXIT_OK
    if args.command == 'train':
        cmd_train(args.manifest, args.shapefeat, args.borchiz, args.out, config, args.subset, args.binary)
    elif args.command == 'predict':
        cmd_predict(args.model, args.shapefeat, args.borchiz, args.out, args.manifest)
    elif args.command == 'eval':
        cmd_eval(args.manifest, args.shapefeat, args.borchiz, args.out, config, args.subset, args.binary, args.k)
    elif args.command == 'rank':
        cmd_rank(args.manifest, args.shapefeat, args.out, config, args.subset, args.binary)
    return EXIT_OK


def main(argv: typ.Optional[typ.Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    _setup_logging(args.verbose)
    try:
        return _run(args)
    except (ConfigError, UsageError) as exc:
        logger.error("%s", exc)
        print(f"wearclass: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WearClassError, OSError) as exc:
        logger.error("%s", exc)
        print(f"wearclass: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:  # pylint: disable=broad-exception-caught
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main())
