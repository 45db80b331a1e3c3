import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from crossnoise.audio_io import write_wav
from crossnoise.cli import main
from crossnoise.corpus import ManifestEntry, load_manifest, write_manifest
from crossnoise.signal_core import Waveform


def run(*argv):
    return main([str(a) for a in argv])


def tree_digest(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    """Clean 4-file corpus plus two long noise recordings."""
    root = tmp_path_factory.mktemp("toy")
    assert run("synth", "--kind", "speechlike", "--duration", 3, "--count", 4, "--seed", 3, "--out", root / "clean") == 0
    assert run("synth", "--kind", "white", "--duration", 6, "--amplitude", 0.1, "--seed", 1,
               "--out", root / "noise" / "white.wav") == 0
    assert run("synth", "--kind", "tone", "--tone-hz", 120, "--duration", 6, "--amplitude", 0.1,
               "--out", root / "noise" / "hum.wav") == 0
    return root


def mix(toy, out, setting="C", *extra):
    return run("mix", "--manifest", toy / "clean" / "manifest.jsonl", "--noise-healthy", toy / "noise" / "white.wav",
               "--noise-pathological", toy / "noise" / "hum.wav", "--setting", setting, "--out", out, "--seed", 5, *extra)


class TestSynth:
    def test_deterministic(self, tmp_path):
        for d in ("a", "b"):
            (tmp_path / d).mkdir()
            assert run("synth", "--kind", "speechlike", "--duration", 4, "--seed", 7, "--out", tmp_path / d / "x.wav") == 0
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == ["x.clean.npy", "x.noise.npy", "x.truth.json", "x.wav"]
        truth = json.loads((tmp_path / "a" / "x.truth.json").read_text())
        assert truth["noise_only_fraction"] == 0.5

    def test_invalid_kind(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run("synth", "--kind", "pink", "--out", "x.wav")
        assert exc.value.code == 2
        assert "usage:" in capsys.readouterr().err

    def test_invalid_spec_is_usage_error(self, tmp_path, capsys):
        assert run("synth", "--kind", "speechlike", "--burst-ms", 5, "--out", tmp_path / "x.wav") == 2
        assert "usage:" in capsys.readouterr().err
        assert list(tmp_path.iterdir()) == []

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert run("synth", "--kind", "white", "--out", blocker / "x.wav") == 1
        assert run("synth", "--kind", "white", "--count", 3, "--out", blocker / "dir") == 1
        assert sorted(p.name for p in tmp_path.iterdir()) == ["file"]

    def test_count_writes_manifest(self, toy):
        entries = load_manifest(toy / "clean" / "manifest.jsonl", check_paths=True)
        assert [e.group.value for e in entries] == ["healthy", "healthy", "pathological", "pathological"]


class TestMix:
    def test_setting_a(self, toy, tmp_path, capsys):
        assert mix(toy, tmp_path / "out", "A") == 0
        out = capsys.readouterr().out
        assert "healthy       n=2    achieved_snr_db mean=20.0" in out
        assert "pathological  n=2    achieved_snr_db mean=20.0" in out
        assert len(list((tmp_path / "out").glob("*.wav"))) == 4

    def test_setting_c(self, toy, tmp_path, capsys):
        assert mix(toy, tmp_path / "out", "C") == 0
        out = capsys.readouterr().out
        assert "healthy       n=2    achieved_snr_db mean=20.0" in out
        assert "pathological  n=2    achieved_snr_db mean=40.0" in out

    def test_missing_noise(self, toy, tmp_path):
        rc = run("mix", "--manifest", toy / "clean" / "manifest.jsonl", "--noise-healthy", toy / "noise" / "nope.wav",
                 "--noise-pathological", toy / "noise" / "hum.wav", "--setting", "A", "--out", tmp_path / "out")
        assert rc == 1
        assert not (tmp_path / "out").exists()

    def test_setting_required(self, toy, tmp_path):
        rc = run("mix", "--manifest", toy / "clean" / "manifest.jsonl", "--noise-healthy", toy / "noise" / "white.wav",
                 "--noise-pathological", toy / "noise" / "hum.wav", "--out", tmp_path / "out")
        assert rc == 2

    def test_setting_from_config(self, toy, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"setting": "B", "bit_depth": 16}))
        rc = run("mix", "--config", cfg, "--manifest", toy / "clean" / "manifest.jsonl", "--noise-healthy",
                 toy / "noise" / "white.wav", "--noise-pathological", toy / "noise" / "hum.wav", "--out", tmp_path / "o")
        assert rc == 0
        assert {e.true_snr_db for e in load_manifest(tmp_path / "o" / "manifest.jsonl")} == {40.0}

    def test_refuses_to_write_into_input_dir(self, toy):
        assert mix(toy, toy / "clean") == 2

    def test_inputs_untouched(self, toy, tmp_path):
        before = tree_digest(toy)
        assert mix(toy, tmp_path / "out", "C", "--keep-components") == 0
        assert tree_digest(toy) == before


@pytest.fixture(scope="module")
def noisy(toy, tmp_path_factory):
    out = tmp_path_factory.mktemp("noisy")
    assert mix(toy, out, "C", "--keep-components") == 0
    return out


class TestAugment:
    def test_deterministic(self, noisy, tmp_path):
        for d in ("a", "b"):
            assert run("augment", "--manifest", noisy / "manifest.jsonl", "--out", tmp_path / d,
                       "--seed", 11, "--epoch", 0) == 0
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")

    def test_epochs_differ(self, tmp_path):
        # larger corpus so two epochs cannot coincide by chance
        src = tmp_path / "src"
        assert run("synth", "--kind", "speechlike", "--duration", 1.5, "--noise-snr", 20, "--count", 40,
                   "--seed", 2, "--out", src) == 0
        for epoch in (0, 1):
            assert run("augment", "--manifest", src / "manifest.jsonl", "--out", tmp_path / f"e{epoch}",
                       "--seed", 11, "--epoch", epoch) == 0
        assert (tmp_path / "e0" / "plan.json").read_bytes() != (tmp_path / "e1" / "plan.json").read_bytes()

    def test_outputs(self, noisy, tmp_path):
        assert run("augment", "--manifest", noisy / "manifest.jsonl", "--out", tmp_path / "o") == 0
        names = {p.name for p in (tmp_path / "o").iterdir()}
        assert {"plan.json", "estimates.json", "skipped.json", "manifest.jsonl", "estimates"} <= names
        assert len(load_manifest(tmp_path / "o" / "manifest.jsonl", check_paths=True)) == 4
        doc = json.loads((tmp_path / "o" / "estimates.json").read_text())
        assert doc["schema_version"] == 1
        assert all(u["alpha"] > 0 for u in doc["utterances"].values())

    @staticmethod
    def _flat_corpus(src, samples):
        src.mkdir()
        entries = []
        for i, group in enumerate(["healthy", "pathological"] * 2):
            write_wav(src / f"s{i}.wav", Waveform(samples, 16000), 16)
            entries.append(ManifestEntry(f"s{i}.wav", f"s{i}", f"s{i}", group))
        write_manifest(src / "manifest.jsonl", entries)

    def test_all_silence_fails(self, tmp_path):
        self._flat_corpus(tmp_path / "src", np.zeros(16000))
        rc = run("augment", "--manifest", tmp_path / "src" / "manifest.jsonl", "--out", tmp_path / "o")
        assert rc == 1
        skipped = json.loads((tmp_path / "o" / "skipped.json").read_text())
        assert [s["reason"] for s in skipped["skipped"]] == ["Silent"] * 4
        assert not (tmp_path / "o" / "plan.json").exists()

    def test_all_speech_skipped(self, tmp_path):
        tone = 0.5 * np.sin(2 * np.pi * 400 * np.arange(16000) / 16000)
        self._flat_corpus(tmp_path / "src", tone)
        # equal frame energies plus a negative margin label every frame as speech
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"vad": {"threshold_db_above_floor": -1.0}}))
        rc = run("augment", "--config", cfg, "--manifest", tmp_path / "src" / "manifest.jsonl", "--out", tmp_path / "o")
        assert rc == 1
        skipped = json.loads((tmp_path / "o" / "skipped.json").read_text())
        assert [s["reason"] for s in skipped["skipped"]] == ["InsufficientNoise"] * 4

    def test_stereo_rejected(self, tmp_path):
        from scipy.io import wavfile

        src = tmp_path / "src"
        src.mkdir()
        wavfile.write(src / "st.wav", 16000, np.zeros((16000, 2), dtype=np.float32))
        write_manifest(src / "manifest.jsonl", [ManifestEntry("st.wav", "st", "st", "healthy")])
        assert run("augment", "--manifest", src / "manifest.jsonl", "--out", tmp_path / "o") == 1

    def test_mixed_rates_rejected(self, tmp_path):
        src = tmp_path / "src"
        assert run("synth", "--kind", "speechlike", "--noise-snr", 20, "--count", 2, "--out", src) == 0
        assert run("synth", "--kind", "speechlike", "--noise-snr", 20, "--rate", 8000, "--out", src / "slow.wav") == 0
        entries = load_manifest(src / "manifest.jsonl") + [ManifestEntry("slow.wav", "slow", "slow", "pathological")]
        write_manifest(src / "manifest.jsonl", entries)
        assert run("augment", "--manifest", src / "manifest.jsonl", "--out", tmp_path / "o") == 1


@pytest.fixture(scope="module")
def augmented(noisy, tmp_path_factory):
    out = tmp_path_factory.mktemp("aug")
    assert run("augment", "--manifest", noisy / "manifest.jsonl", "--out", out, "--seed", 4) == 0
    return out


class TestVerify:
    def test_practical(self, augmented, tmp_path):
        assert run("verify", "--augment-dir", augmented, "--mode", "practical", "--report", tmp_path / "r.json") == 0
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["schema_version"] == 1 and doc["mode"] == "practical"
        assert doc["passed"] and doc["summary"]["max_abs_residual"] <= 2.0
        assert doc["truth_referenced"]["summary"]["max_abs_residual"] <= 2.0
        for key in ("snr_h_own", "snr_p_cross", "residual_c1", "residual_c2", "residual_c3"):
            assert isinstance(doc["pairs"][0][key], float)

    def test_oracle(self, augmented, tmp_path):
        # toy clean files share one duration, so oracle residuals vanish
        assert run("verify", "--augment-dir", augmented, "--mode", "oracle", "--report", tmp_path / "r.json") == 0
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["summary"]["max_abs_residual"] < 1e-9

    def test_zero_tolerance_fails(self, augmented, tmp_path):
        rc = run("verify", "--augment-dir", augmented, "--mode", "practical", "--tolerance", 0,
                 "--report", tmp_path / "r.json")
        assert rc == 1

    def test_standard_shows_disparity(self, augmented, tmp_path):
        assert run("verify", "--augment-dir", augmented, "--mode", "standard", "--report", tmp_path / "r.json") == 0
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["summary"]["gap"]["mean"] == pytest.approx(-20.0, abs=1.0)

    def test_oracle_without_sidecars(self, toy, tmp_path):
        assert mix(toy, tmp_path / "noisy", "A") == 0
        assert run("augment", "--manifest", tmp_path / "noisy" / "manifest.jsonl", "--out", tmp_path / "aug") == 0
        rc = run("verify", "--augment-dir", tmp_path / "aug", "--mode", "oracle", "--report", tmp_path / "r.json")
        assert rc == 2
        # practical mode still works, just without the truth-referenced section
        assert run("verify", "--augment-dir", tmp_path / "aug", "--report", tmp_path / "p.json") == 0
        assert "truth_referenced" not in json.loads((tmp_path / "p.json").read_text())

    def test_not_an_augment_dir(self, tmp_path):
        assert run("verify", "--augment-dir", tmp_path, "--report", tmp_path / "r.json") == 1


class TestConfigAndLogging:
    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"vadd": {}}))
        assert run("--config", cfg, "synth", "--kind", "white", "--out", tmp_path / "x.wav") == 2

    def test_bad_vad_value(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"vad": {"hop_ms": 50}}))
        assert run("synth", "--config", cfg, "--kind", "white", "--out", tmp_path / "x.wav") == 2

    def test_global_flags_before_or_after(self, tmp_path):
        assert run("--seed", 3, "synth", "--kind", "white", "--out", tmp_path / "a.wav") == 0
        assert run("synth", "--seed", 3, "--kind", "white", "--out", tmp_path / "b.wav") == 0
        assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()

    def test_key_value_logs(self, tmp_path, capfd):
        run("--log-level", "INFO", "synth", "--kind", "white", "--out", tmp_path / "a.wav")
        err = capfd.readouterr().err.strip().splitlines()
        assert err and all(line.startswith("level=") for line in err)
        assert "event=synth" in err[-1]

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "crossnoise", "synth", "--kind", "tone", "--out",
                               str(tmp_path / "t.wav")], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "t.wav").is_file()
