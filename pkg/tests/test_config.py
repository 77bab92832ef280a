from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from selfdistill.config import (
    SCHEMES, ConfigError, ExperimentConfig, config_from_dict, config_hash, config_to_dict,
    defaults_reference, dump_config, parse_config, parse_config_text,
)

DOCS = Path(__file__).resolve().parents[1] / "docs" / "config_reference.md"


def test_minimal_config_is_fully_defaulted():
    cfg = parse_config_text('[dataset]\nk = 4\n[scheme]\nkind = "sd"\n')
    assert cfg.dataset.k == 4
    assert cfg.scheme.kind == "sd"
    assert cfg.train == ExperimentConfig().train
    assert cfg.model.hidden == [64]


def test_empty_config_is_default():
    assert parse_config_text("") == ExperimentConfig()


def test_misspelled_key_is_named():
    with pytest.raises(ConfigError, match=r"scheme\.temprature"):
        parse_config_text("[scheme]\ntemprature = 2.0\n")


def test_unknown_section():
    with pytest.raises(ConfigError, match="optimiser"):
        parse_config_text("[optimiser]\nlr = 1\n")


@pytest.mark.parametrize("text,path", [
    ('[train]\nepochs = "ten"\n', "train.epochs"),
    ("[train]\nearly_stopping = 1\n", "train.early_stopping"),
    ("[model]\nhidden = 64\n", "model.hidden"),
    ('[model]\nhidden = [64, "x"]\n', r"model.hidden\[1\]"),
    ("[scheme]\ntemperature = true\n", "scheme.temperature"),
    ("dataset = 3\n", "dataset"),
])
def test_type_errors_carry_key_path(text, path):
    with pytest.raises(ConfigError, match=path):
        parse_config_text(text)


@pytest.mark.parametrize("text,path", [
    ("[dataset]\nk = 1\n", "dataset.k"),
    ("[train]\nepochs = 0\n", "train.epochs"),
    ("[train]\nvalidation_fraction = 1.0\n", "train.validation_fraction"),
    ("[train]\nearly_stopping = true\nvalidation_fraction = 0.0\n", "train.early_stopping"),
    ('[scheme]\nkind = "magic"\n', "scheme.kind"),
    ("[scheme]\nalpha = 1.5\n", "scheme.alpha"),
    ("[model]\nhidden = [0]\n", "model.hidden"),
    ('[dataset]\nsource = "csv"\n', "dataset.path"),
    ("generations = 0\n", "generations"),
])
def test_invariant_violations(text, path):
    with pytest.raises(ConfigError, match=path):
        parse_config_text(text)


def test_invalid_toml():
    with pytest.raises(ConfigError, match="TOML"):
        parse_config_text("[dataset\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.toml")


def test_parse_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("seed = 5\n")
    assert parse_config(p).seed == 5


def test_int_where_float_expected_is_normalised():
    a = parse_config_text("[train]\nlearning_rate = 1\nlr_milestones = [1, 0.5]\n")
    b = parse_config_text("[train]\nlearning_rate = 1.0\nlr_milestones = [1.0, 0.5]\n")
    assert a == b
    assert config_hash(a) == config_hash(b)


configs = st.builds(
    lambda seed, k, eps, T, kind, hidden, es: ExperimentConfig().replace(
        seed=seed, dataset={"k": k}, scheme={"epsilon": eps, "temperature": T, "kind": kind},
        model={"hidden": hidden}, train={"early_stopping": es}),
    st.integers(0, 2**31), st.integers(2, 50), st.floats(0, 0.99), st.floats(0.01, 100),
    st.sampled_from(SCHEMES), st.lists(st.integers(1, 512), max_size=3), st.booleans(),
)


@settings(max_examples=60, deadline=None)
@given(configs)
def test_dump_parse_round_trip(cfg):
    back = parse_config_text(dump_config(cfg))
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)


@settings(max_examples=40, deadline=None)
@given(configs)
def test_dict_round_trip(cfg):
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_hash_changes_with_any_field():
    base = ExperimentConfig()
    h = config_hash(base)
    variants = [
        base.replace(seed=1), base.replace(dataset={"overlap": 1.1}), base.replace(model={"hidden": [65]}),
        base.replace(train={"momentum": 0.8}), base.replace(scheme={"temperature": 1.5}),
        base.replace(k_nn=4), base.replace(n_bins=10),
    ]
    hashes = {config_hash(v) for v in variants}
    assert h not in hashes and len(hashes) == len(variants)
    assert config_hash(ExperimentConfig()) == h


def test_replace_merges_sections():
    cfg = ExperimentConfig().replace(train={"epochs": 3})
    assert cfg.train.epochs == 3
    assert cfg.train.batch_size == ExperimentConfig().train.batch_size
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(train={"epoch": 3})


def test_reference_lists_every_key():
    ref = defaults_reference()
    for key in ("seed", "dataset.k", "dataset.standardize", "model.cross_hidden", "train.ema_decay",
                "scheme.student_scaling", "scheme.keep_fraction"):
        assert f"`{key}`" in ref


def test_reference_page_is_current():
    assert DOCS.read_text() == defaults_reference() + "\n", "regenerate with `selfdistill config-reference`"
