"""
Tests for matrix, label and document I/O and run manifests
"""

import io
import json

import numpy as np
import pytest

from shiftbench.core import InputValidationError, MatrixFileError
from shiftbench.utils.files import (
    RunManifest,
    config_hash,
    file_digest,
    load_document,
    manifest_path_for,
    read_labels,
    read_logits,
    read_matrix,
    read_posteriors,
    read_simplex,
    write_matrix,
)


class TestReadMatrix:
    """Test CSV matrix parsing"""

    def test_header_detected(self, tmp_path):
        """Test that a leading non-numeric row is taken as class names"""
        path = tmp_path / "m.csv"
        path.write_text("cat,dog\n0.5,0.5\n0.25,0.75\n")
        matrix, header, first_line = read_matrix(path)
        assert header == ["cat", "dog"]
        assert first_line == 2
        assert matrix.tolist() == [[0.5, 0.5], [0.25, 0.75]]

    def test_blank_lines_skipped(self, tmp_path):
        """Test that empty lines are ignored"""
        path = tmp_path / "m.csv"
        path.write_text("0.5,0.5\n\n0.25,0.75\n")
        matrix, header, _ = read_matrix(path)
        assert header is None
        assert matrix.shape == (2, 2)

    def test_non_numeric_cell_reports_line(self, tmp_path):
        """Test that a bad data cell is located by line"""
        path = tmp_path / "m.csv"
        path.write_text("0.5,0.5\n0.5,x\n")
        with pytest.raises(MatrixFileError) as info:
            read_matrix(path)
        assert info.value.details["line"] == 2
        assert f"{path}:2:" in str(info.value)

    def test_ragged_rows(self, tmp_path):
        """Test that rows of different widths are rejected"""
        path = tmp_path / "m.csv"
        path.write_text("0.5,0.5\n0.2,0.3,0.5\n")
        with pytest.raises(MatrixFileError) as info:
            read_matrix(path)
        assert info.value.details["line"] == 2

    def test_missing_and_empty_files(self, tmp_path):
        """Test missing files and files without data"""
        with pytest.raises(MatrixFileError):
            read_matrix(tmp_path / "absent.csv")
        path = tmp_path / "empty.csv"
        path.write_text("a,b\n")
        with pytest.raises(MatrixFileError):
            read_matrix(path)

    def test_repr_floats_read_back_exactly(self, tmp_path, rng):
        """Test that written floats are bit-identical when read back"""
        rows = rng.random((20, 3)) / 7
        path = tmp_path / "m.csv"
        write_matrix(path, rows, ["a", "b", "c"])
        matrix, header, _ = read_matrix(path)
        assert header == ["a", "b", "c"]
        np.testing.assert_array_equal(matrix, rows)

    def test_write_to_stream(self):
        """Test writing a matrix to an open text stream"""
        buffer = io.StringIO()
        write_matrix(buffer, np.array([0.25, 0.75]))
        assert buffer.getvalue() == "0.25,0.75\n"


class TestTypedReaders:
    """Test posterior, logit and prior readers"""

    def test_posterior_row_error_has_file_line(self, tmp_path):
        """Test that a bad posterior row maps to its file line"""
        path = tmp_path / "p.csv"
        path.write_text("a,b\n0.5,0.5\n0.9,0.3\n")
        with pytest.raises(MatrixFileError) as info:
            read_posteriors(path)
        assert info.value.details["line"] == 3

    def test_posteriors_renormalised(self, tmp_path):
        """Test ingestion renormalisation within tolerance"""
        path = tmp_path / "p.csv"
        path.write_text("0.5,0.5000001\n")
        posteriors = read_posteriors(path)
        assert posteriors.rows.sum() == pytest.approx(1.0, abs=1e-12)

    def test_non_finite_logit(self, tmp_path):
        """Test that a non-finite logit is rejected with its line"""
        path = tmp_path / "z.csv"
        path.write_text("0.0,1.0\ninf,0.0\n")
        with pytest.raises(MatrixFileError) as info:
            read_logits(path)
        assert info.value.details["line"] == 2

    def test_simplex_row_or_column(self, tmp_path):
        """Test priors stored as a row or a column"""
        row = tmp_path / "row.csv"
        row.write_text("0.2,0.8\n")
        column = tmp_path / "column.csv"
        column.write_text("0.2\n0.8\n")
        assert read_simplex(row).tolist() == [0.2, 0.8]
        assert read_simplex(column).tolist() == [0.2, 0.8]

    def test_simplex_rejects_matrix(self, tmp_path):
        """Test that a prior file must be one-dimensional"""
        path = tmp_path / "m.csv"
        path.write_text("0.5,0.5\n0.5,0.5\n")
        with pytest.raises(MatrixFileError):
            read_simplex(path)


class TestReadLabels:
    """Test label file parsing"""

    def test_indices_with_header(self, tmp_path):
        """Test integer labels after a header line"""
        path = tmp_path / "y.csv"
        path.write_text("label\n0\n2\n1\n")
        assert read_labels(path).tolist() == [0, 2, 1]

    def test_class_names(self, tmp_path):
        """Test labels given by class name"""
        path = tmp_path / "y.csv"
        path.write_text("dog\ncat\n")
        assert read_labels(path, ["cat", "dog"]).tolist() == [1, 0]

    @pytest.mark.parametrize(
        "content,line",
        [("0\n-1\n", 2), ("0\n1,2\n", 2), ("0\nbird\n", 2)],
    )
    def test_bad_lines(self, tmp_path, content, line):
        """Test that malformed label lines are located"""
        path = tmp_path / "y.csv"
        path.write_text(content)
        with pytest.raises(MatrixFileError) as info:
            read_labels(path)
        assert info.value.details["line"] == line

    def test_no_labels(self, tmp_path):
        """Test that an empty label file is rejected"""
        path = tmp_path / "y.csv"
        path.write_text("\n")
        with pytest.raises(MatrixFileError):
            read_labels(path)


class TestDocuments:
    """Test YAML/JSON documents and hashing"""

    def test_yaml_and_json(self, tmp_path):
        """Test that both formats load as mappings"""
        yaml_path = tmp_path / "c.yaml"
        yaml_path.write_text("alphas: [1.0, 10.0]\n")
        json_path = tmp_path / "c.json"
        json_path.write_text('{"alphas": [1.0, 10.0]}')
        assert load_document(yaml_path) == load_document(json_path)

    def test_not_a_mapping(self, tmp_path):
        """Test that a top-level list is rejected"""
        path = tmp_path / "c.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(InputValidationError):
            load_document(path)

    def test_missing_document(self, tmp_path):
        """Test that a missing document is an input error"""
        with pytest.raises(InputValidationError):
            load_document(tmp_path / "absent.yaml")

    def test_config_hash_ignores_key_order(self):
        """Test canonical hashing"""
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})


class TestRunManifest:
    """Test run manifests"""

    def test_for_inputs_and_write(self, tmp_path):
        """Test input digests and the written document"""
        data = tmp_path / "in.csv"
        data.write_text("0.5,0.5\n")
        manifest = RunManifest.for_inputs(
            "estimate", "0.1.0", [data, None], config={"estimator": "em"}
        )
        assert manifest.inputs == {str(data): file_digest(data)}

        written = manifest.write(tmp_path / "nested" / "manifest.json")
        document = json.loads(written.read_text())
        assert document["command"] == "estimate"
        assert document["config"] == {"estimator": "em"}
        assert "created_at" in document

    def test_manifest_path_for(self, tmp_path):
        """Test manifest placement for directories and files"""
        assert manifest_path_for(tmp_path) == tmp_path / "manifest.json"
        expected = tmp_path / "r.json.manifest.json"
        assert manifest_path_for(tmp_path / "r.json") == expected
