import pytest

from gflowlab.config import ConfigError, build_env, dump_config, load_config


def test_defaults_resolve():
    cfg = load_config(text="")
    assert cfg.env.kind == "hypergrid"
    assert cfg.training.epsilon == 0.0          # hypergrid auto
    assert cfg.backward.ema_tau == 0.25
    assert cfg.replay.alpha == 0.5 and cfg.replay.beta == 0.0
    assert cfg.backward.lr == cfg.training.lr
    assert cfg.replay.enabled is False          # subtb default objective


def test_bitseq_auto_values():
    cfg = load_config(text="[env]\nkind = bitseq\n[backward]\nkind = tlm\n")
    assert cfg.training.epsilon == 1e-3
    assert cfg.training.weight_decay == 1e-5
    assert cfg.backward.ema_tau == 0.1
    assert cfg.backward.lr_decay == 0.9999
    assert cfg.replay.alpha == 0.9 and cfg.replay.beta == 0.1


def test_tlm_lr_decay_only_for_tlm():
    cfg = load_config(text="[backward]\nkind = uniform\n")
    assert cfg.backward.lr_decay == cfg.training.lr_decay == 1.0
    cfg = load_config(text="[backward]\nkind = tlm\n")
    assert cfg.backward.lr_decay == 0.999


def test_replay_auto_for_dqn():
    cfg = load_config(text="[objective]\nkind = softdqn\n")
    assert cfg.replay.enabled is True
    cfg = load_config(text="[objective]\nkind = softdqn\n[replay]\nenabled = false\n")
    assert cfg.replay.enabled is False


def test_overrides_and_unknown_keys():
    cfg = load_config(text="", overrides=["backward.kind=tlm", "training.lr=0.01"])
    assert cfg.backward.kind == "tlm"
    assert cfg.training.lr == 0.01
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config(text="", overrides=["training.nope=1"])
    with pytest.raises(ConfigError, match="unknown config section"):
        load_config(text="[wat]\nx = 1\n")
    with pytest.raises(ConfigError, match="section.key"):
        load_config(text="", overrides=["justakey=1"])


def test_invalid_values_rejected():
    with pytest.raises(ConfigError, match="objective.kind"):
        load_config(text="[objective]\nkind = zt\n")
    with pytest.raises(ConfigError, match="epsilon"):
        load_config(text="[training]\nepsilon = 1.5\n")
    with pytest.raises(ConfigError, match="boolean"):
        load_config(text="[training]\nanneal_epsilon = maybe\n")
    with pytest.raises(ConfigError, match="subtb_lambda"):
        load_config(text="[objective]\nkind = subtb\nsubtb_lambda = -1\n")


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config(path="/nonexistent/x.cfg")


def test_dump_roundtrip(tmp_path):
    cfg = load_config(text="[env]\nkind = bitseq\n[training]\nlr = 2e-3\nseed = 9\n",
                      overrides=["backward.kind=tlm"])
    resolved = dump_config(cfg)
    p = tmp_path / "resolved.cfg"
    p.write_text(resolved)
    cfg2 = load_config(path=str(p))
    assert dump_config(cfg2) == resolved
    assert cfg2.training.lr == 2e-3
    assert cfg2.backward.lr_decay == 0.9999


def test_build_env_kinds(tmp_path):
    cfg = load_config(text="[env]\nkind = micro\nname = chain\nchain_length = 4\n")
    env = build_env(cfg.env)
    assert env.num_states == 4
    edges = tmp_path / "edges.txt"
    edges.write_text("0 1\n0 2\n")
    cfg = load_config(text=f"[env]\nkind = micro\nname = custom\nedges_file = {edges}\n")
    assert build_env(cfg.env).num_terminals == 2
