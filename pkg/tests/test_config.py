import pytest
import yaml

from wxclear.config import (
    LossConfig,
    ModelConfig,
    RunConfig,
    SdpConfig,
    TrainConfig,
    from_dict,
    load_config,
    model_config_from_yaml,
    model_config_to_yaml,
)
from wxclear.errors import ConfigError


def test_default_model_config_stages():
    cfg = ModelConfig()
    stages = cfg.stages
    assert [s.channels for s in stages] == [16, 32, 64, 128]
    assert [s.groups for s in stages] == [4, 4, 2, 2]
    assert all(s.blocks % 2 == 0 for s in stages)


def test_model_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(blocks=(3, 4, 4, 4))  # odd block count
    with pytest.raises(ConfigError):
        ModelConfig(blocks=(4, 4, 4))  # wrong stage count
    with pytest.raises(ConfigError):
        ModelConfig(base_channels=7)
    with pytest.raises(ConfigError):
        ModelConfig(heads=(5, 2, 4, 8))  # 16 % 5 != 0
    with pytest.raises(ConfigError):
        ModelConfig(attention_mix="spatial_only")
    with pytest.raises(ConfigError):
        ModelConfig(sdp=SdpConfig(fusion_heads=7))
    with pytest.raises(ConfigError):
        SdpConfig(max_pool_branch="both")
    with pytest.raises(ConfigError):
        SdpConfig(use_sobel=False, use_svd=False)


def test_loss_and_train_validation():
    with pytest.raises(ConfigError):
        LossConfig(beta=-0.1)
    with pytest.raises(ConfigError):
        LossConfig(patch_size=1)
    with pytest.raises(ConfigError):
        TrainConfig(crop=60)  # not a multiple of 16
    with pytest.raises(ConfigError):
        TrainConfig(steps=0)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError) as err:
        from_dict(RunConfig, {"model": {"base_channels": 8, "typo_key": 1}})
    assert "typo_key" in str(err.value)
    with pytest.raises(ConfigError):
        from_dict(RunConfig, {"extra_section": {}})


def test_yaml_round_trip():
    cfg = ModelConfig.tiny()
    text = model_config_to_yaml(cfg)
    assert model_config_from_yaml(text) == cfg


def test_load_config_file(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "model": {"base_channels": 8, "groups": [2, 2, 2, 2], "sdp": {"fusion_heads": 2}},
                "train": {"steps": 10},
                "data_root": "d",
            }
        )
    )
    cfg = load_config(path)
    assert cfg.model.base_channels == 8
    assert cfg.train.steps == 10
    assert cfg.data_root == "d"
    assert cfg.loss == LossConfig()


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_tiny_preset_is_valid():
    cfg = ModelConfig.tiny()
    assert cfg.base_channels == 8
    assert cfg.stages[3].channels == 64
