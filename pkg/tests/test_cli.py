import subprocess
import sys

import pytest

from isinggan.cli import main
from isinggan.config import ConfigError, boolean, float_list, int_list, load_flat_config


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def run(*argv):
    return main([str(a) for a in argv])


SIM = ("simulate", "--num-temps", 3, "--per-temp", 4, "--n", 16, "--max-steps", 3000, "--seed", 2)
TRAIN = ("--steps", 6, "--batch-size", 4, "--g-hidden", 16, "--d-hidden", 16, "--embedding-dim", 8,
         "--noise-dim", 4, "--branch-widths", "2,3,4")


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """simulate -> calibrate -> train, run twice in separate directories."""
    roots = []
    for name in ("a", "b"):
        r = tmp_path_factory.mktemp(name)
        assert run(*SIM, "--out", r / "data") == 0
        assert run("features", "calibrate", "--dataset", r / "data", "--out", r / "map.csv") == 0
        assert run("train", "--dataset", r / "data", "--out", r / "run", *TRAIN) == 0
        roots.append(r)
    return roots


def test_flat_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nper-temp = 4\nmax_steps = 10  # inline\n")
    assert load_flat_config(p) == {"per_temp": "4", "max_steps": "10"}
    p.write_text("[section]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_flat_config(p)
    with pytest.raises(ConfigError):
        load_flat_config(tmp_path / "missing.cfg")


def test_value_parsers():
    assert float_list("1e-6, 0.1") == [1e-6, 0.1]
    assert int_list("4,32,92") == [4, 32, 92]
    assert boolean("yes") is True and boolean("0") is False
    for f, bad in ((float_list, "a,b"), (int_list, "1.5"), (boolean, "maybe")):
        with pytest.raises(ValueError):
            f(bad)


def test_pipeline_outputs(pipeline):
    r = pipeline[0]
    assert (r / "data" / "manifest.csv").exists() and (r / "data" / "magnetization.png").exists()
    assert (r / "data" / "magnetization.csv").read_text().startswith("temperature,mean_abs_m,std_abs_m,count\n")
    assert (r / "map.csv").exists() and (r / "map.png").exists()
    for f in ("checkpoint.bcgn", "loss_log.csv", "losses.png"):
        assert (r / "run" / f).exists()
    assert len((r / "run" / "loss_log.csv").read_text().splitlines()) == 7


@pytest.mark.parametrize("cmd", ["evaluate", "sensitivity", "embed-stats", "invert"])
def test_seeded_commands_are_byte_identical(pipeline, cmd):
    outs = []
    for r in pipeline:
        out = r / f"out-{cmd}"
        ck = ("--checkpoint", r / "run" / "checkpoint.bcgn")
        args = {
            "evaluate": ("evaluate", *ck, "--map", r / "map.csv", "--num-temps", 4, "--samples", 3, "--out", out),
            "sensitivity": ("sensitivity", *ck, "--num-seeds", 2, "--out", out),
            "embed-stats": ("embed-stats", *ck, "--samples", 20, "--out", out),
            "invert": ("features", "invert", "--map", r / "map.csv", "--dataset", r / "data",
                       "--out", out / "t_hat.csv"),
        }[cmd]
        assert run(*args) == 0
        outs.append(out)
    a, b = tree(outs[0]), tree(outs[1])
    assert a and a.keys() == b.keys()
    for k in a:
        if k.endswith(".csv") and cmd == "invert":  # first column holds the absolute image path
            strip = [lambda t: [ln.split(",", 1)[1] for ln in t.decode().splitlines()]] * 2
            assert strip[0](a[k]) == strip[1](b[k])
        else:
            assert a[k] == b[k], k


def test_earlier_stages_byte_identical(pipeline):
    a, b = (tree(r) for r in pipeline)
    keys = [k for k in a if k.startswith(("data/", "map", "run/")) and k != "run/checkpoint.bcgn"]
    assert "run/loss_log.csv" in keys and "data/T000_S0000.pgm" in keys
    for key in keys:
        assert a[key] == b[key], key


def test_train_byte_identical_for_identical_invocation(pipeline, tmp_path):
    # the checkpoint echoes the dataset path, so reuse the same dataset
    r = pipeline[0]
    for name in ("x", "y"):
        assert run("train", "--dataset", r / "data", "--out", tmp_path / name, *TRAIN) == 0
    assert tree(tmp_path / "x") == tree(tmp_path / "y")
    assert tree(tmp_path / "x")["checkpoint.bcgn"] == (r / "run" / "checkpoint.bcgn").read_bytes()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("num-temps = 2\nper-temp = 2\nn = 8\nmax-steps = 10\nplots = false\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path / "d", "--per-temp", 3) == 0
    assert len((tmp_path / "d" / "manifest.csv").read_text().splitlines()) == 1 + 2 * 3
    assert not (tmp_path / "d" / "magnetization.png").exists()


def test_config_supplies_required_option(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(f"out = {tmp_path / 'd2'}\nnum-temps = 2\nper-temp = 2\nn = 8\nmax-steps = 10\n")
    assert run("simulate", "--config", cfg) == 0


def test_fresh_embedder_stats(tmp_path, capsys):
    assert run("embed-stats", "--strategy", "normalized-scalar", "--samples", 50, "--out", tmp_path) == 0
    assert "dead fraction" in capsys.readouterr().out
    assert (tmp_path / "embed_stats.csv").exists() and (tmp_path / "embed_stats.png").exists()


def test_train_resume_via_cli(pipeline, tmp_path):
    r = pipeline[0]
    assert run("train", "--dataset", r / "data", "--out", tmp_path / "h", *TRAIN[:1], 3, *TRAIN[2:],
               "--checkpoint-every", 3) == 0
    assert (tmp_path / "h" / "checkpoint_step000003.bcgn").exists()
    assert run("train", "--dataset", r / "data", "--out", tmp_path / "h2", "--resume",
               tmp_path / "h" / "checkpoint.bcgn", "--steps", 6) == 0
    assert (tmp_path / "h2" / "checkpoint.bcgn").read_bytes() == (r / "run" / "checkpoint.bcgn").read_bytes()


@pytest.mark.parametrize("argv", [
    ("simulate",),
    ("simulate", "--out", "x", "--n", "abc"),
    ("simulate", "--out", "x", "--temps", "0,1"),
    ("train", "--dataset", "d", "--out", "o", "--strategy", "one-hot"),
    ("frobnicate",),
    ("features",),
])
def test_validation_errors_exit_1(tmp_path, argv):
    argv = [a if a != "x" else str(tmp_path / "x") for a in argv]
    assert run(*argv) == 1


def test_bad_config_exit_1(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = red\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o") == 1
    assert run("simulate", "--config", tmp_path / "absent.cfg", "--out", tmp_path / "o") == 1
    cfg.write_text("n = sixteen\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o") == 1


def test_missing_inputs_exit_1(tmp_path):
    assert run("features", "calibrate", "--dataset", tmp_path / "nope", "--out", tmp_path / "m.csv") == 1
    assert run("evaluate", "--checkpoint", tmp_path / "nope.bcgn", "--map", tmp_path / "m.csv",
               "--out", tmp_path / "e") == 1


def test_corrupt_checkpoint_exit_1(tmp_path):
    (tmp_path / "bad.bcgn").write_bytes(b"JUNKJUNKJUNKJUNK")
    assert run("sensitivity", "--checkpoint", tmp_path / "bad.bcgn", "--out", tmp_path / "s") == 1


def test_unwritable_output_exit_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("simulate", "--out", blocker / "sub", "--num-temps", 2, "--per-temp", 2, "--n", 8) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "isinggan", "embed-stats", "--strategy", "class-bin",
                           "--out", str(tmp_path), "--plots", "no"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "class-bin embedding" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "isinggan", "train"], capture_output=True, text=True)
    assert proc.returncode == 1 and "required" in proc.stderr


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
