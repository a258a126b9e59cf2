import numpy as np
import pytest
import torch

from symalign_trainer import NetConfig, SmawError, ValueNet, read_smaw, write_smaw
from symalign_trainer.model import batch_to_torch
from symalign_trainer import encode_batch, StateRecord


def test_param_count_matches_inference_side():
    assert ValueNet().param_count() == 159042


def test_export_covers_expected_names():
    tensors = ValueNet().export_tensors()
    assert tensors["pitch_embedding"].shape == (91, 64)
    assert tensors["position_embedding"].shape == (26, 64)
    assert tensors["head.weight"].shape == (64, 2)
    assert tensors["layers.0.attn.wq.weight"].shape == (64, 64)
    assert tensors["config"].tolist() == [6, 8, 64, 64, 91, 26]
    total = sum(int(t.size) for name, t in tensors.items() if name != "config")
    assert total == 159042


def test_smaw_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {f"t{k}": rng.normal(size=(k + 1, 3)).astype(np.float32) for k in range(4)}
    path = tmp_path / "x.smaw"
    write_smaw(path, tensors)
    loaded = read_smaw(path)
    for name in tensors:
        assert np.array_equal(loaded[name], tensors[name])
    again = tmp_path / "y.smaw"
    write_smaw(again, loaded)
    assert again.read_bytes() == path.read_bytes()


def test_smaw_rejects_corruption(tmp_path):
    path = tmp_path / "x.smaw"
    write_smaw(path, {"t": np.ones(5, np.float32)})
    data = bytearray(path.read_bytes())
    data[-6] ^= 0x10
    path.write_bytes(bytes(data))
    with pytest.raises(SmawError, match="checksum"):
        read_smaw(path)


def test_forward_deterministic_under_seed():
    rec = StateRecord((40, 45, 47), ((40,), (45,), (47,), (49,)), center=2, target_slot=8)
    batch = batch_to_torch(encode_batch([rec]))
    torch.manual_seed(7)
    a = ValueNet()(batch).detach().numpy()
    torch.manual_seed(7)
    b = ValueNet()(batch).detach().numpy()
    assert np.array_equal(a, b)


def test_padding_tokens_do_not_leak():
    rec = StateRecord((40,), ((40,), (41,)), center=0, target_slot=7)
    base = encode_batch([rec])
    garbled = {k: v.copy() for k, v in base.items()}
    garbled["perf_tokens"][0, :7] = 3  # masked perf slots
    torch.manual_seed(1)
    net = ValueNet()
    with torch.no_grad():
        a = net(batch_to_torch(base)).numpy()
        b = net(batch_to_torch(garbled)).numpy()
    valid = base["slot_valid"][0]
    assert np.array_equal(a[0][valid], b[0][valid])
