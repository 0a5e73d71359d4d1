"""
semdist command line
====================

    semdist ingest|build-index|query|evaluate|sweep-k|sweep-m|gen-synth|settings [flags]

Exit codes: 0 success, 1 validation error, 2 parse error.
"""

import argparse
import logging
import sys
from contextlib import contextmanager

from errors import ParseError, SemdistError, ValidationError
from eval_metrics import evaluate_run, score_rankings
from experiments import DEFAULT_K_VALUES, DEFAULT_M_RATIOS, sweep_k, sweep_m, write_sweep_csv
from feature_store import (IndexFile, ingest_features, ingest_labels, ingest_rankings,
                           iter_probabilities)
from retrieval_index import build_index
from semantic_features import truncate_top_k
from settings_manager import SettingsManager
from synth_corpus import generate_corpus, write_corpus

logger = logging.getLogger('semdist')

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARSE = 2

# flags that override a setting of the same name
SETTING_KEYS = ('n_classes', 'k', 'm_ratio', 'min_shared', 'p', 'workers', 'seed', 'strict_prob',
                'relevance', 'log_level')


@contextmanager
def _output(path):
    if path:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            yield f
    else:
        yield sys.stdout


def _require(args, *names):
    for name in names:
        if not getattr(args, name):
            raise ValidationError(f"--{name.replace('_', '-')} is required for {args.command}")


def _parse_list(text, cast):
    try:
        return [cast(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise ValidationError(f"Bad value list: {text!r}") from None


def load_index(config, args):
    """Index from --index, else built from --probs"""
    params = config.distance_params()
    if args.index:
        return IndexFile(args.index).load(params)
    _require(args, 'probs')
    features = ingest_features(args.probs, config.k, config.n_classes, config.strict_prob)
    return build_index(features, params, config.n_classes)


def cmd_ingest(config, args):
    """Validate a probability file and report its storage footprint at K"""
    _require(args, 'probs')
    count = positive = kept = 0
    for vector in iter_probabilities(args.probs, config.n_classes, config.strict_prob):
        count += 1
        nonzero = int((vector.probs > 0).sum())
        positive += nonzero
        kept += min(nonzero, config.k)
    dense_bytes = count * config.n_classes * 8
    sparse_bytes = kept * (8 + 4)  # float64 probability + int32 class id
    with _output(args.out) as out:
        out.write(f"vectors\t{count}\n")
        out.write(f"mean_positive\t{positive / count if count else 0.0:.6f}\n")
        out.write(f"k\t{config.k}\n")
        out.write(f"dense_bytes\t{dense_bytes}\n")
        out.write(f"sparse_bytes\t{sparse_bytes}\n")
    return EXIT_OK


def cmd_build_index(config, args):
    _require(args, 'probs', 'out')
    features = ingest_features(args.probs, config.k, config.n_classes, config.strict_prob)
    IndexFile(args.out).save(build_index(features, config.distance_params(), config.n_classes))
    return EXIT_OK


def cmd_query(config, args):
    """Ranked list for a database member (--query-id) or an external vector (--vector-file)"""
    index = load_index(config, args)
    if args.query_id:
        q = index.get(args.query_id)
        if q is None:
            raise ValidationError(f"Image {args.query_id} is not in the index")
    elif args.vector_file:
        vector = next(iter(iter_probabilities(args.vector_file, index.n_classes, config.strict_prob)), None)
        if vector is None:
            raise ValidationError(f"{args.vector_file} holds no vector")
        q = truncate_top_k(vector, index.params.k)
    else:
        raise ValidationError("query needs --query-id or --vector-file")

    ranked = index.query(q, config.p)
    with _output(args.out) as out:
        for rank, item in enumerate(ranked.items, start=1):
            score = 'rejected' if item.rejected else f"{item.score:.6f}"
            out.write(f"{rank}\t{item.image_id}\t{score}\t{item.shared}\n")
    return EXIT_OK


def cmd_evaluate(config, args):
    """NDCG@p / ACG@p report over every database image, or over --rankings"""
    _require(args, 'labels')
    labels = ingest_labels(args.labels)
    if args.rankings:
        report = score_rankings(ingest_rankings(args.rankings), labels, config.p, config.workers, config.relevance)
    else:
        index = load_index(config, args)
        report = evaluate_run(index, list(index), labels, config.p, config.workers, config.relevance)
    with _output(args.out) as out:
        out.write(report.format())
    return EXIT_OK


def cmd_sweep_k(config, args):
    _require(args, 'labels')
    k_values = _parse_list(args.k_values, int) if args.k_values else list(DEFAULT_K_VALUES)
    k_max = max(k_values)
    if args.index:
        index_file = IndexFile(args.index)
        _, index_k = index_file.read_header()
        if index_k < k_max:
            raise ValidationError(f"Index truncated at K={index_k}, sweep needs K={k_max}")
        features = index_file.load_features()
    else:
        _require(args, 'probs')
        features = ingest_features(args.probs, k_max, config.n_classes, config.strict_prob)
    rows = sweep_k(features, ingest_labels(args.labels), k_values, config)
    with _output(args.out) as out:
        write_sweep_csv(rows, 'k', config.p, out)
    return EXIT_OK


def cmd_sweep_m(config, args):
    _require(args, 'labels')
    ratios = _parse_list(args.ratios, float) if args.ratios else list(DEFAULT_M_RATIOS)
    rows = sweep_m(load_index(config, args), ingest_labels(args.labels), ratios, config)
    with _output(args.out) as out:
        write_sweep_csv(rows, 'm_ratio', config.p, out)
    return EXIT_OK


def cmd_generate_synth(config, args):
    """Planted-cluster probability file (--probs) and label file (--labels)"""
    _require(args, 'probs', 'labels')
    corpus = generate_corpus(args.clusters, args.per_cluster, args.overlap, config.k, config.n_classes,
                             config.seed, args.noise, args.secondary_labels, args.common)
    write_corpus(corpus, args.probs, args.labels, config.n_classes, dense=args.dense)
    return EXIT_OK


def cmd_settings(settings, args):
    _require(args, 'out')
    settings.save_settings(args.out)
    return EXIT_OK


COMMANDS = {
    'ingest': cmd_ingest,
    'build-index': cmd_build_index,
    'query': cmd_query,
    'evaluate': cmd_evaluate,
    'sweep-k': cmd_sweep_k,
    'sweep-m': cmd_sweep_m,
    'gen-synth': cmd_generate_synth,
}


def build_parser():
    info = SettingsManager().get_setting_info

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--settings', help='JSON settings file')
    common.add_argument('--probs', help='probability file (dense or sparse flavor)')
    common.add_argument('--labels', help='label file')
    common.add_argument('--index', help='index file')
    common.add_argument('--out', help='output file (default: stdout)')
    common.add_argument('--n-classes', dest='n_classes', type=int, help=info('n_classes')['description'])
    common.add_argument('--k', type=int, help=info('k')['description'])
    common.add_argument('--m-ratio', dest='m_ratio', type=float, help=info('m_ratio')['description'])
    common.add_argument('--min-shared', dest='min_shared', type=int, help=info('min_shared')['description'])
    common.add_argument('--p', type=int, help=info('p')['description'])
    common.add_argument('--workers', type=int, help=info('workers')['description'])
    common.add_argument('--seed', type=int, help=info('seed')['description'])
    common.add_argument('--strict-prob', dest='strict_prob', action='store_true', default=None,
                        help=info('strict_prob')['description'])
    common.add_argument('--relevance', choices=['shared', 'binary'], help=info('relevance')['description'])
    common.add_argument('--log-level', dest='log_level', help=info('log_level')['description'])

    parser = argparse.ArgumentParser(prog='semdist', description='Semantic-feature image retrieval')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('ingest', parents=[common], help='validate a probability file')
    sub.add_parser('build-index', parents=[common], help='truncate to top-K and write an index file')

    query = sub.add_parser('query', parents=[common], help='ranked list for one query')
    query.add_argument('--query-id', dest='query_id')
    query.add_argument('--vector-file', dest='vector_file')

    evaluate = sub.add_parser('evaluate', parents=[common], help='NDCG@p / ACG@p report')
    evaluate.add_argument('--rankings', help='score externally produced rankings instead')

    sweep = sub.add_parser('sweep-k', parents=[common], help='evaluate over several K')
    sweep.add_argument('--k-values', dest='k_values', help='comma-separated, default 20,30,40,50,60')

    sweep = sub.add_parser('sweep-m', parents=[common], help='evaluate over several M1/M2 ratios')
    sweep.add_argument('--ratios', help='comma-separated, default 2000,5000,10000,50000')

    synth = sub.add_parser('gen-synth', parents=[common], help='write a planted-cluster corpus')
    synth.add_argument('--clusters', type=int, default=10)
    synth.add_argument('--per-cluster', dest='per_cluster', type=int, default=100)
    synth.add_argument('--overlap', type=int, default=40)
    synth.add_argument('--noise', type=float, default=0.1)
    synth.add_argument('--common', type=int, default=0, help='classes every image shares, ranked above the cores')
    synth.add_argument('--secondary-labels', dest='secondary_labels', type=int, default=0)
    synth.add_argument('--dense', action='store_true', help='write the dense CSV flavor')

    sub.add_parser('settings', parents=[common], help='write the effective settings as JSON')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        settings = SettingsManager(args.settings)
        settings.update({key: getattr(args, key) for key in SETTING_KEYS})
        logging.basicConfig(level=str(settings.get('log_level')).upper(),
                            format='%(asctime)s %(levelname)s %(name)s: %(message)s')
        if args.command == 'settings':
            return cmd_settings(settings, args)
        return COMMANDS[args.command](settings.to_run_config(), args)
    except ParseError as e:
        logger.error(f"Parse error: {e}")
        return EXIT_PARSE
    except SemdistError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_VALIDATION
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_VALIDATION


if __name__ == '__main__':
    sys.exit(main())
