"""End-to-end checks of the command-line interface.

Runs the argparse entry point in-process (fast, same interpreter) and
asserts on exit codes, emitted JSON and the determinism contract.
"""

import json

import numpy as np
import pytest

from emcstab.cli import main


def run(*argv):
    return main(list(argv))


class TestListAndStructure:
    def test_list_systems_mentions_catalog(self, capsys):
        assert run("list-systems") == 0
        out = capsys.readouterr().out
        for name in ("rigid_body", "lagrange_top", "symmetric_oscillator", "harmonic_s1"):
            assert name in out
        assert "sleeping" in out

    def test_check_structure_passes_for_builtin(self, capsys):
        assert run("check-structure", "rigid_body") == 0
        assert "ok: worst residual" in capsys.readouterr().out

    def test_check_structure_with_params(self, capsys):
        assert run("check-structure", "lagrange_top", "--I3", "2.0") == 0

    def test_unknown_system_is_usage_error(self, capsys):
        assert run("certify", "nosuchsystem", "--equilibrium", "x") == 1
        err = capsys.readouterr().err
        assert "nosuchsystem" in err
        assert "rigid_body" in err  # admissible names are listed

    def test_unknown_parameter_is_usage_error(self, capsys):
        # omega belongs to the top, not the rigid body
        assert run("certify", "rigid_body", "--equilibrium", "axis3_plus",
                   "--omega", "2.0") == 1
        assert "admissible" in capsys.readouterr().err


class TestCertify:
    def test_major_axis_certifies_with_known_spectrum(self, tmp_path):
        out = tmp_path / "cert.json"
        code = run("certify", "rigid_body", "--equilibrium", "axis3_plus",
                   "--output", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["verdict"] == "CertifiedStable"
        assert doc["kind"] == "emc_certificate"
        assert doc["schema_version"] == 1
        np.testing.assert_allclose(doc["spectrum"], [1 / 6, 2 / 3], atol=1e-9)
        assert doc["sigma"] == 1.0

    def test_intermediate_axis_is_inconclusive(self, tmp_path):
        out = tmp_path / "cert.json"
        code = run("certify", "rigid_body", "--equilibrium", "axis2_plus",
                   "--output", str(out))
        assert code == 2
        doc = json.loads(out.read_text())
        assert doc["verdict"] == "Inconclusive_Indefinite"
        assert doc["sigma"] is None

    @pytest.mark.parametrize("omega,expected_code,expected_verdict", [
        (2.5, 0, "CertifiedStable"),
        (1.5, 2, "Inconclusive_Indefinite"),
    ])
    def test_top_spin_threshold(self, tmp_path, omega, expected_code, expected_verdict):
        out = tmp_path / "cert.json"
        code = run("certify", "lagrange_top", "--omega", str(omega),
                   "--equilibrium", "sleeping", "--output", str(out))
        assert code == expected_code
        assert json.loads(out.read_text())["verdict"] == expected_verdict

    def test_explicit_point_and_generator(self, tmp_path):
        out = tmp_path / "cert.json"
        code = run("certify", "symmetric_oscillator",
                   "--at", "1,0,0,0,1,0", "--xi", "0,0,1", "--output", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["K_dim"] == 3
        assert doc["zero_cluster_dim"] == 1

    def test_stdout_json_when_no_output_given(self, capsys):
        code = run("certify", "rigid_body", "--equilibrium", "axis3_plus")
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["verdict"] == "CertifiedStable"

    def test_missing_equilibrium_is_usage_error(self, capsys):
        assert run("certify", "rigid_body") == 1
        assert "--at or --equilibrium" in capsys.readouterr().err

    def test_unknown_equilibrium_label(self, capsys):
        assert run("certify", "rigid_body", "--equilibrium", "axis9") == 1
        assert "axis9" in capsys.readouterr().err

    def test_reruns_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            assert run("certify", "lagrange_top", "--equilibrium", "sleeping",
                       "--output", str(path)) == 0
        assert a.read_bytes() == b.read_bytes()


class TestConfigFile:
    def _write(self, tmp_path, text):
        path = tmp_path / "run.toml"
        path.write_text(text)
        return str(path)

    def test_full_run_from_config(self, tmp_path):
        cfg = self._write(tmp_path, """
[system]
name = "lagrange_top"
[system.params]
omega = 2.5
[equilibrium]
name = "sleeping"
""")
        out = tmp_path / "cert.json"
        assert run("certify", "--config", cfg, "--output", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["verdict"] == "CertifiedStable"
        assert doc["parameters"]["omega"] == 2.5

    def test_flags_override_config(self, tmp_path):
        cfg = self._write(tmp_path, """
[system]
name = "lagrange_top"
[system.params]
omega = 2.5
[equilibrium]
name = "sleeping"
""")
        out = tmp_path / "cert.json"
        code = run("certify", "--config", cfg, "--omega", "1.5", "--output", str(out))
        assert code == 2
        doc = json.loads(out.read_text())
        assert doc["parameters"]["omega"] == 1.5
        assert doc["verdict"] == "Inconclusive_Indefinite"

    def test_experiment_settings_from_config(self, tmp_path):
        cert = tmp_path / "cert.json"
        assert run("certify", "rigid_body", "--equilibrium", "axis3_plus",
                   "--output", str(cert)) == 0
        cfg = self._write(tmp_path, """
[experiment]
deltas = [1e-3]
samples = 2
t_final = 1.0
""")
        out = tmp_path / "exp.json"
        assert run("verify", "--certificate", str(cert), "--config", cfg,
                   "--output", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["deltas"] == [1e-3]
        assert doc["samples_per_delta"] == 2
        assert doc["t_final"] == 1.0


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cert = root / "cert.json"
    exp = root / "exp.json"
    csv_path = root / "series.csv"
    assert run("certify", "rigid_body", "--equilibrium", "axis3_plus",
               "--output", str(cert)) == 0
    assert run("verify", "--certificate", str(cert),
               "--deltas", "1e-3", "--samples", "2", "--t-final", "1.0",
               "--output", str(exp), "--csv", str(csv_path)) == 0
    return cert, exp, csv_path


class TestVerifyAndReport:
    def test_experiment_reports_consistency(self, artifacts):
        _, exp, _ = artifacts
        doc = json.loads(exp.read_text())
        assert doc["kind"] == "stability_experiment"
        assert doc["verdict"] == "consistent_with_stable"
        assert doc["violations"] == 0
        assert all(d < 0.01 for d in doc["max_orbit_distance"])

    def test_csv_has_expected_columns_and_rows(self, artifacts):
        _, _, csv_path = artifacts
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "t,delta,sample,orbit_distance,f"
        # 2 samples, 1001 monitored steps each
        assert len(lines) == 1 + 2 * 1001
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[3]) == pytest.approx(1e-3, rel=1e-6)

    def test_report_merges_and_exits_zero(self, artifacts, capsys):
        cert, exp, _ = artifacts
        assert run("report", "--certificate", str(cert), "--experiment", str(exp)) == 0
        out = capsys.readouterr().out
        assert "certificate and experiment agree" in out
        assert "CertifiedStable" in out
        assert "consistent_with_stable" in out

    def test_report_flags_disagreement(self, tmp_path, capsys):
        cert = tmp_path / "cert.json"
        exp = tmp_path / "exp.json"
        assert run("certify", "rigid_body", "--equilibrium", "axis2_plus",
                   "--output", str(cert)) == 2
        assert run("verify", "--certificate", str(cert), "--deltas", "1e-3",
                   "--samples", "2", "--t-final", "1.0", "--output", str(exp)) == 0
        code = run("report", "--certificate", str(cert), "--experiment", str(exp))
        assert code == 2
        assert "no certified-stable" in capsys.readouterr().out

    def test_verify_rejects_non_certificate_input(self, tmp_path, capsys):
        bogus = tmp_path / "bogus.json"
        bogus.write_text(json.dumps({"kind": "something_else"}))
        assert run("verify", "--certificate", str(bogus)) == 1
        assert "not a certificate" in capsys.readouterr().err

    def test_verify_reruns_are_byte_identical(self, artifacts, tmp_path):
        cert, exp, _ = artifacts
        again = tmp_path / "again.json"
        assert run("verify", "--certificate", str(cert),
                   "--deltas", "1e-3", "--samples", "2", "--t-final", "1.0",
                   "--output", str(again)) == 0
        assert again.read_bytes() == exp.read_bytes()


class TestFindRe:
    def test_refines_near_circular_orbit(self, tmp_path):
        out = tmp_path / "re.json"
        code = run("find-re", "symmetric_oscillator",
                   "--at", "1.05,0,0,0,0.95,0", "--output", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["kind"] == "relative_equilibrium"
        assert doc["residual_norm"] < 1e-9
        np.testing.assert_allclose(doc["xi"], [0, 0, 1], atol=1e-6)

    def test_needs_a_seed_point(self, capsys):
        assert run("find-re", "symmetric_oscillator") == 1
        assert "--at" in capsys.readouterr().err
