import json

import pytest

from semdist import EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, main

SMALL = ['--k', '30', '--n-classes', '200']


@pytest.fixture
def corpus_files(tmp_path):
    probs, labels = tmp_path / 'probs.txt', tmp_path / 'labels.txt'
    code = main(['gen-synth', '--probs', str(probs), '--labels', str(labels), '--clusters', '4',
                 '--per-cluster', '10', '--overlap', '20', '--seed', '3', *SMALL])
    assert code == EXIT_OK
    return probs, labels


@pytest.fixture
def index_file(tmp_path, corpus_files):
    probs, _ = corpus_files
    path = tmp_path / 'index.txt'
    assert main(['build-index', '--probs', str(probs), '--out', str(path), *SMALL]) == EXIT_OK
    return path


def test_gen_synth_is_deterministic(tmp_path, corpus_files):
    probs, labels = corpus_files
    again = tmp_path / 'again.txt', tmp_path / 'again.labels'
    main(['gen-synth', '--probs', str(again[0]), '--labels', str(again[1]), '--clusters', '4',
          '--per-cluster', '10', '--overlap', '20', '--seed', '3', *SMALL])
    assert probs.read_bytes() == again[0].read_bytes()
    assert labels.read_bytes() == again[1].read_bytes()
    assert len(probs.read_text().splitlines()) == 40


def test_ingest_reports_storage(corpus_files, capsys):
    probs, _ = corpus_files
    assert main(['ingest', '--probs', str(probs), *SMALL]) == EXIT_OK
    assert capsys.readouterr().out == ('vectors\t40\n'
                                       'mean_positive\t30.000000\n'
                                       'k\t30\n'
                                       'dense_bytes\t64000\n'
                                       'sparse_bytes\t14400\n')


def test_build_index_header(index_file):
    assert index_file.read_text().splitlines()[0] == 'semdist-index v1 N=200 K=30'


def test_query_by_id(index_file, capsys):
    assert main(['query', '--index', str(index_file), '--query-id', 'img_00', '--p', '5']) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5
    ranks, ids, scores, shared = zip(*(line.split('\t') for line in lines))
    assert ranks == ('1', '2', '3', '4', '5')
    assert all(image_id in {f"img_0{i}" for i in range(1, 10)} for image_id in ids)
    assert all(score != 'rejected' for score in scores)
    assert all(int(s) >= 20 for s in shared)


def test_query_by_vector_file(tmp_path, index_file, corpus_files, capsys):
    probs, _ = corpus_files
    first = probs.read_text().splitlines()[0]
    vector_file = tmp_path / 'vector.txt'
    vector_file.write_text('outsider ' + first.split(' ', 1)[1] + '\n')
    main(['query', '--index', str(index_file), '--query-id', 'img_00', '--p', '39'])
    by_id = [line.split('\t')[1:] for line in capsys.readouterr().out.splitlines()]
    assert main(['query', '--index', str(index_file), '--vector-file', str(vector_file), '--p', '40']) == EXIT_OK
    by_vector = [line.split('\t')[1:] for line in capsys.readouterr().out.splitlines()]
    # an external copy of img_00 sees img_00 itself plus the leave-one-out list of img_00
    assert [row[1:] for row in by_vector if row[0] == 'img_00'][0][1] == '30'
    assert [row for row in by_vector if row[0] != 'img_00'] == by_id
    assert len(by_vector) == 40


def test_query_lists_rejected_images(index_file, capsys):
    assert main(['query', '--index', str(index_file), '--query-id', 'img_00', '--p', '39']) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 39
    assert [line.split('\t')[2] == 'rejected' for line in lines] == [False] * 9 + [True] * 30


def test_evaluate_is_identical_for_any_worker_count(tmp_path, index_file, corpus_files):
    _, labels = corpus_files
    outputs = []
    for workers in ('1', '4', '8'):
        out = tmp_path / f'report_{workers}.txt'
        assert main(['evaluate', '--index', str(index_file), '--labels', str(labels), '--p', '5',
                     '--workers', workers, '--out', str(out)]) == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    lines = outputs[0].decode().splitlines()
    assert len(lines) == 41
    assert lines[-1] == 'MEAN\t1.000000\t1.000000\t0'


def test_evaluate_from_probs_matches_index(tmp_path, index_file, corpus_files, capsys):
    probs, labels = corpus_files
    main(['evaluate', '--index', str(index_file), '--labels', str(labels), '--p', '5'])
    from_index = capsys.readouterr().out
    main(['evaluate', '--probs', str(probs), '--labels', str(labels), '--p', '5', *SMALL])
    assert capsys.readouterr().out == from_index


def test_evaluate_external_rankings(tmp_path, capsys):
    labels = tmp_path / 'labels.txt'
    labels.write_text('q\tx;y\na\tx;y\nb\tx\nc\t\n')
    rankings = tmp_path / 'rankings.txt'
    rankings.write_text('q\ta b c\n')
    assert main(['evaluate', '--rankings', str(rankings), '--labels', str(labels), '--p', '3']) == EXIT_OK
    assert capsys.readouterr().out == 'q\t1.000000\t1.000000\t0\nMEAN\t1.000000\t1.000000\t0\n'


def test_sweep_k(tmp_path, corpus_files):
    probs, labels = corpus_files
    out = tmp_path / 'sweep.csv'
    assert main(['sweep-k', '--probs', str(probs), '--labels', str(labels), '--k-values', '10,20,30',
                 '--p', '5', '--out', str(out), *SMALL]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == 'k,mean_ndcg@5,mean_acg@5,degenerate'
    assert [line.split(',')[0] for line in lines[1:]] == ['10', '20', '30']


def test_sweep_k_from_index_needs_wide_enough_truncation(index_file, corpus_files):
    _, labels = corpus_files
    assert main(['sweep-k', '--index', str(index_file), '--labels', str(labels), '--k-values', '20,30',
                 '--p', '5']) == EXIT_OK
    assert main(['sweep-k', '--index', str(index_file), '--labels', str(labels), '--k-values', '20,40',
                 '--p', '5']) == EXIT_VALIDATION


def test_sweep_m(tmp_path, index_file, corpus_files):
    _, labels = corpus_files
    out = tmp_path / 'sweep.csv'
    assert main(['sweep-m', '--index', str(index_file), '--labels', str(labels), '--p', '5',
                 '--out', str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == 'm_ratio,mean_ndcg@5,mean_acg@5,degenerate'
    assert [line.split(',')[0] for line in lines[1:]] == ['2000', '5000', '10000', '50000']


def test_settings_command(tmp_path):
    out = tmp_path / 'effective.json'
    assert main(['settings', '--k', '20', '--out', str(out)]) == EXIT_OK
    saved = json.loads(out.read_text())
    assert saved['k'] == 20 and saved['p'] == 100


def test_settings_file_feeds_commands(tmp_path, index_file, capsys):
    settings = tmp_path / 'semdist_settings.json'
    settings.write_text(json.dumps({'p': 2}))
    assert main(['query', '--settings', str(settings), '--index', str(index_file), '--query-id', 'img_00']) == EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == 2


def test_parse_error_exit_code(tmp_path):
    probs = tmp_path / 'probs.txt'
    probs.write_text('img_a 1:0.5\nimg_b 1:abc\n')
    assert main(['build-index', '--probs', str(probs), '--out', str(tmp_path / 'i.txt'), *SMALL]) == EXIT_PARSE


@pytest.mark.parametrize('argv', [
    ['build-index', '--out', 'unused.txt'],
    ['query', '--probs', 'missing.txt', '--query-id', 'x'],
    ['evaluate', '--probs', 'missing.txt'],
    ['build-index', '--probs', 'missing.txt', '--out', 'unused.txt', '--k', '0'],
    ['build-index', '--probs', 'missing.txt', '--out', 'unused.txt', '--m-ratio', 'inf'],
])
def test_validation_exit_code(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_VALIDATION


def test_unknown_query_id(index_file):
    assert main(['query', '--index', str(index_file), '--query-id', 'nobody']) == EXIT_VALIDATION


def test_out_of_range_probability(tmp_path):
    probs = tmp_path / 'probs.txt'
    probs.write_text('img_a 1:1.5\n')
    assert main(['build-index', '--probs', str(probs), '--out', str(tmp_path / 'i.txt'), *SMALL]) == EXIT_VALIDATION


def test_sweep_k_over_a_corpus_with_common_classes(tmp_path):
    probs, labels, out = tmp_path / 'probs.txt', tmp_path / 'labels.txt', tmp_path / 'sweep.csv'
    sizes = ['--k', '60', '--n-classes', '200']
    assert main(['gen-synth', '--probs', str(probs), '--labels', str(labels), '--clusters', '4',
                 '--per-cluster', '10', '--overlap', '20', '--common', '20', '--noise', '0.05',
                 '--seed', '5', *sizes]) == EXIT_OK
    assert main(['sweep-k', '--probs', str(probs), '--labels', str(labels), '--k-values', '20,40',
                 '--p', '5', '--out', str(out), *sizes]) == EXIT_OK
    rows = [line.split(',') for line in out.read_text().splitlines()[1:]]
    assert [row[0] for row in rows] == ['20', '40']
    assert float(rows[0][1]) < 0.9
    assert rows[1][1] == '1.000000'
