import json

import pytest

import settings_manager
from errors import InvalidSetting, ParseError
from settings_manager import RunConfig, SettingsManager
from similarity import DistanceParams


def test_defaults():
    settings = SettingsManager()
    assert settings.get('n_classes') == 1000
    assert settings.get('k') == 60
    assert settings.get('m_ratio') == 10000.0
    assert settings.get('min_shared') == 10
    assert settings.get('p') == 100
    assert settings.get('workers') is None
    assert settings.get('strict_prob') is False


def test_workers_default_to_machine_parallelism(monkeypatch):
    monkeypatch.setattr(settings_manager.psutil, 'cpu_count', lambda logical=True: 12)
    assert SettingsManager().to_run_config().workers == 12
    monkeypatch.setattr(settings_manager.psutil, 'cpu_count', lambda logical=True: None)
    assert SettingsManager().to_run_config().workers == 1


def test_file_overrides_defaults(tmp_path):
    path = tmp_path / 'semdist_settings.json'
    path.write_text(json.dumps({'k': 40, 'p': 10, 'workers': 2, 'last_updated': 'yesterday', 'legacy': 1}))
    config = SettingsManager(str(path)).to_run_config()
    assert (config.k, config.p, config.workers, config.n_classes) == (40, 10, 2, 1000)


def test_update_overrides_file_and_skips_none(tmp_path):
    path = tmp_path / 'settings.json'
    path.write_text(json.dumps({'k': 40, 'min_shared': 5}))
    settings = SettingsManager(str(path))
    settings.update({'k': 30, 'min_shared': None, 'relevance': 'binary'})
    assert settings.get('k') == 30
    assert settings.get('min_shared') == 5
    assert settings.to_run_config().relevance == 'binary'


def test_missing_file_falls_back_to_defaults(tmp_path):
    assert SettingsManager(str(tmp_path / 'absent.json')).get_all() == SettingsManager().get_all()


@pytest.mark.parametrize('overrides', [
    {'k': 0},
    {'k': 2.5},
    {'m_ratio': -1},
    {'p': 'many'},
    {'relevance': 'graded'},
    {'strict_prob': 'yes'},
    {'log_level': 'LOUD'},
    {'workers': 0},
    {'m_ratio': float('inf')},
    {'m_ratio': float('nan')},
    {'k': True},
    {'p': False},
    {'min_shared': True},
    {'m_ratio': True},
    {'workers': True},
])
def test_invalid_values(tmp_path, overrides):
    with pytest.raises(InvalidSetting):
        SettingsManager().update(overrides)
    path = tmp_path / 'settings.json'
    path.write_text(json.dumps(overrides))
    with pytest.raises(InvalidSetting):
        SettingsManager(str(path))


def test_unknown_override_is_rejected():
    with pytest.raises(InvalidSetting):
        SettingsManager().update({'colour': 'blue'})


def test_malformed_file(tmp_path):
    path = tmp_path / 'settings.json'
    path.write_text('{"k": 40,\n')
    with pytest.raises(ParseError):
        SettingsManager(str(path))
    path.write_text('[1, 2]')
    with pytest.raises(ParseError):
        SettingsManager(str(path))


def test_save_settings(tmp_path):
    settings = SettingsManager()
    settings.update({'k': 20, 'workers': 3})
    settings.save_settings(tmp_path / 'out.json')
    saved = json.loads((tmp_path / 'out.json').read_text())
    assert saved['k'] == 20 and saved['workers'] == 3
    assert 'last_updated' in saved
    assert SettingsManager(str(tmp_path / 'out.json')).get_all() == settings.get_all()


def test_setting_info():
    settings = SettingsManager()
    assert settings.get_setting_info('k')['type'] == 'int'
    assert settings.get_setting_info('unknown')['description'] == 'Setting'


@pytest.mark.parametrize('kwargs', [
    {'k': 0},
    {'p': 0},
    {'workers': 0},
    {'m_ratio': 0},
    {'m_ratio': float('inf')},
    {'min_shared': -1},
    {'n_classes': 50, 'k': 60},
])
def test_run_config_validation(kwargs):
    with pytest.raises(InvalidSetting):
        RunConfig(**kwargs)


def test_run_config_distance_params():
    config = RunConfig(k=40, m_ratio=5000.0, min_shared=7)
    assert config.distance_params() == DistanceParams(m1=5000.0, m2=1.0, min_shared=7, k=40)
    assert config.distance_params(k=20, m_ratio=2000.0) == DistanceParams(m1=2000.0, m2=1.0, min_shared=7, k=20)


def test_infinite_ratio_from_file_is_rejected(tmp_path):
    path = tmp_path / 'settings.json'
    path.write_text('{"m_ratio": Infinity}')
    with pytest.raises(InvalidSetting):
        SettingsManager(str(path))
