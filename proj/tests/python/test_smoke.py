import os
import subprocess
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.transform import Rotation
from sklearn.cluster import DBSCAN

import point2pose as p2p

CLI = os.environ.get("P2P_CLI")
SOURCE = Path(os.environ.get("P2P_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def test_rotation_round_trip():
    mats = Rotation.random(200, random_state=0).as_matrix()
    for R in mats:
        back = p2p.decode_rotation(p2p.encode_rotation(R))
        assert np.abs(back - R).max() < 1e-10
    D = p2p.decode_rotation(np.array([2.0, 0.1, -1.0, 0.3, 3.0, 0.5]))
    assert np.allclose(D.T @ D, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(D) - 1.0) < 1e-12


def test_degenerate_rotation_raises():
    with pytest.raises(p2p.DegenerateRotation):
        p2p.decode_rotation(np.zeros(6))
    assert issubclass(p2p.DegenerateRotation, p2p.Error)


def test_mpjpe_matches_numpy():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(24, 3)), rng.normal(size=(24, 3))
    expected = 1000 * np.linalg.norm((a - a[0]) - (b - b[0]), axis=1).mean()
    assert p2p.mpjpe(a, b) == pytest.approx(expected, rel=1e-12)
    assert p2p.mpjpe(a, a + 5.0) == pytest.approx(0.0, abs=1e-9)


def test_angular_error_matches_scipy():
    rng = np.random.default_rng(2)
    ra = Rotation.random(6, random_state=3)
    rb = Rotation.random(6, random_state=4)
    enc = lambda r: np.stack([p2p.encode_rotation(m) for m in r.as_matrix()])
    expected = np.degrees((ra * rb.inv()).magnitude()).mean()
    assert p2p.angular_error(enc(ra), enc(rb)) == pytest.approx(expected, abs=1e-8)
    del rng


def test_chamfer_matches_brute_force():
    rng = np.random.default_rng(5)
    a, b = rng.uniform(size=(60, 3)), rng.uniform(size=(45, 3))
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    assert p2p.chamfer(a, b) == pytest.approx(d2.min(1).mean() + d2.min(0).mean(), rel=1e-12)
    with pytest.raises(p2p.EmptyInput):
        p2p.chamfer(np.zeros((0, 3)), b)


def test_dbscan_noise_matches_sklearn():
    rng = np.random.default_rng(6)
    pts = np.concatenate([rng.normal(0, 0.05, (60, 3)), rng.normal(1, 0.05, (60, 3)), rng.uniform(-1, 2, (20, 3))])
    ours = np.array(p2p.dbscan(pts, 0.15, 5))
    ref = DBSCAN(eps=0.15, min_samples=5).fit(pts).labels_
    assert np.array_equal(ours == -1, ref == -1)
    assert len(set(ours[ours >= 0])) == len(set(ref[ref >= 0]))


def test_fps_is_greedy_max_min():
    rng = np.random.default_rng(7)
    pts = rng.uniform(size=(100, 3))
    idx = p2p.farthest_point_sampling(pts, 10, 3)
    expected = [3]
    d = np.full(100, np.inf)
    while len(expected) < 10:
        d = np.minimum(d, np.linalg.norm(pts - pts[expected[-1]], axis=1))
        expected.append(int(d.argmax()))
    assert idx == expected


def test_sor_and_gpc_return_subsets():
    seq = p2p.generate_sequence(joints=24, frames=1, points=256, seed=3)
    cloud = seq["points"][0] + np.array([0.0, 0.0, 3.0])
    kept = p2p.sor(cloud, 8, 2.0)
    assert set(kept) <= set(range(256))
    noisy = np.concatenate([cloud, np.random.default_rng(8).uniform(-1.5, 4.5, (13, 3))])
    gkept = p2p.gpc(noisy, cell=0.1)
    assert set(gkept) <= set(range(len(noisy)))
    assert p2p.chamfer(noisy[gkept], cloud) < p2p.chamfer(noisy, cloud)


def test_generate_sequence_shapes():
    seq = p2p.generate_sequence(joints=8, frames=5, points=64, seed=1)
    assert len(seq["points"]) == 5 and seq["points"][0].shape == (64, 3)
    assert seq["coords"][0].shape == (8, 3) and seq["rots"][0].shape == (8, 6)
    again = p2p.generate_sequence(joints=8, frames=5, points=64, seed=1)
    assert np.array_equal(seq["points"][4], again["points"][4])
    assert len(p2p.skeleton_parents(8)) == 8


def test_config_errors():
    cfg = p2p.Config.parse("model: {joints: 10}")
    assert cfg.joints == 10 and len(cfg.hash()) == 16
    assert p2p.Config.parse(cfg.to_yaml()).hash() == cfg.hash()
    with pytest.raises(p2p.ConfigError):
        p2p.Config.parse("model: {bogus: 1}")
    cfg = p2p.Config.load(SOURCE / "configs" / "desk.yaml")
    assert cfg.mode == "ot-cfm"


@pytest.mark.skipif(not CLI, reason="p2p CLI path not provided")
def test_cli_trained_checkpoint_samples(tmp_path):
    data, run = tmp_path / "data", tmp_path / "run"
    subprocess.run([CLI, "synth", "--out", str(data), "--sequences", "1", "--frames", "6", "--points", "64",
                    "--joints", "8", "--window", "3"], check=True, capture_output=True)
    subprocess.run([CLI, "train", "--config", str(SOURCE / "configs" / "tiny.yaml"), "--data", str(data),
                    "--out", str(run)], check=True, capture_output=True)
    ds = p2p.read_dataset(data)
    assert ds["joints"] == 8 and len(ds["sequences"]) == 1
    ck = p2p.Checkpoint.load(run / "model.ckpt")
    assert ck.num_parameters > 0 and ck.config.joints == 8
    seq = ds["sequences"][0]
    hist_c = [c - c[0] for c in seq["coords"][:2]]
    coords, rots = ck.sample(seq["points"][:3], hist_c, seq["rots"][:2], seed=1)
    assert coords.shape == (8, 3) and rots.shape == (8, 6)
    assert np.isfinite(coords).all()
    report = ck.rollout(seq["points"], seq["coords"], seq["rots"], teacher_forcing=True)
    assert len(report["frames"]) == 4
    assert np.isfinite(report["mean_mpjpe_mm"])
    with pytest.raises(p2p.IoError):
        p2p.Checkpoint.load(tmp_path / "missing.ckpt")
