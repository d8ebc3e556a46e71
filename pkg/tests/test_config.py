import pytest

from fedcw.config import ConfigError, parse_config, to_text


def test_minimal_static_gets_defaults():
    cfg = parse_config("scenario = static\nn_stations = 10\ntraffic_rate_mbps = 10\n")
    assert cfg.sim_time_s == 20.0 and cfg.step_ms == 20.0 and cfg.fl_period_s == 2.5
    assert cfg.ddpg.lr == 0.002 and cfg.ddpg.tau == 0.001 and cfg.ddpg.batch == 64
    assert cfg.selection.min_samples == 64 and cfg.resolved_top_k() == 5
    assert cfg.n_windows == 1000 and cfg.n_rounds == 8 and cfg.windows_per_round == 125


def test_paper_scale_dynamic_accepted():
    cfg = parse_config("scenario = dynamic\nn_stations = 60\nn_fixed_traffic = 15\n"
                       "n_random_traffic = 45\ntraffic_rate_mbps = 10\n")
    assert cfg.n_stations == 60


def test_fl_period_must_divide_by_step():
    with pytest.raises(ConfigError) as err:
        parse_config("scenario = static\nn_stations = 10\ntraffic_rate_mbps = 10\nfl_period_s = 2.49\n")
    assert err.value.key == "fl_period_s"


@pytest.mark.parametrize("text, key", [
    ("scenario = static\n", "n_stations"),
    ("scenario = static\nn_stations = 2\n", "traffic_rate_mbps"),
    ("scenario = static\nn_stations = 2\ntraffic_rate_mbps = 1\nbogus = 3\n", "bogus"),
    ("scenario = static\nn_stations = 2\nn_stations = 3\ntraffic_rate_mbps = 1\n", "n_stations"),
    ("scenario = static\nn_stations = 2\ntraffic_rate_mbps = 1\nmode = magic\n", "mode"),
    ("scenario = static\nn_stations = 2\ntraffic_rate_mbps = 1\ndistances = 1, 40\n", "distances"),
    ("scenario = dynamic\nn_stations = 5\nn_fixed_traffic = 2\nn_random_traffic = 2\n"
     "traffic_rate_mbps = 1\n", "n_random_traffic"),
    ("scenario = static\nn_stations = 2\ntraffic_rate_mbps = 1\nselection.w1 = 0.9\n", "selection"),
    ("scenario = static\nn_stations = 2\ntraffic_rate_mbps = 1\nfixed_cw = 20\n", "fixed_cw"),
])
def test_rejections_name_the_key(text, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key


def test_comments_and_round_trip():
    text = ("# a cell\nscenario = dynamic  # inline\nn_stations = 4\nn_fixed_traffic = 1\n"
            "n_random_traffic = 3\ntraffic_rate_mbps = 2.5\ndistances = 1,2,3,4\n"
            "selection.pruning = off\nddpg.hidden = 16,16\naggregation.lambda = 0.5\n")
    cfg = parse_config(text)
    assert cfg.distances == [1.0, 2.0, 3.0, 4.0] and not cfg.selection.pruning
    assert cfg.ddpg.hidden == (16, 16) and cfg.lam == 0.5
    assert parse_config(to_text(cfg)) == cfg


def test_bianchi_scenario_needs_no_rate():
    cfg = parse_config("scenario = bianchi-validate\nn_stations = 5\nfixed_cw = 31\n")
    assert cfg.run_id == "bianchi-validate-efrl-s0"
