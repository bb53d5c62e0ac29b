import numpy as np
import pytest

from colorvein.synth import (
    ManifestError,
    export_corpus,
    generate_subject,
    load_manifest,
    subject_seed,
)


def iou(a, b) -> float:
    inter = (a.data & b.data).sum()
    union = (a.data | b.data).sum()
    return inter / max(union, 1)


class TestGenerator:
    def test_deterministic(self):
        a = generate_subject(42, 2, (64, 64))
        b = generate_subject(42, 2, (64, 64))
        for img1, img2 in zip(a.samples, b.samples):
            assert np.array_equal(img1.data, img2.data)
        for gt1, gt2 in zip(a.ground_truth, b.ground_truth):
            assert np.array_equal(gt1.data, gt2.data)

    def test_distinct_seeds_distinct_trees(self):
        # skeleton IoU < 0.5 across random pairs of subjects
        subjects = [generate_subject(9000 + i, 1, (64, 64)) for i in range(20)]
        rng = np.random.default_rng(0)
        high = 0
        pairs = 0
        for _ in range(100):
            i, j = rng.choice(len(subjects), size=2, replace=False)
            pairs += 1
            if iou(subjects[i].ground_truth[0], subjects[j].ground_truth[0]) >= 0.5:
                high += 1
        assert pairs == 100
        assert high == 0

    def test_jitter_is_bounded_and_samples_differ(self):
        subj = generate_subject(7, 3, (64, 64))
        assert len(subj.samples) == 3
        # same tree rendered with jitter: samples differ but overlap heavily
        g0, g1 = subj.ground_truth[0], subj.ground_truth[1]
        assert not np.array_equal(g0.data, g1.data)
        assert iou(g0, g1) > 0.3

    def test_dims_validated(self):
        with pytest.raises(ValueError):
            generate_subject(0, 1, (32, 32))
        with pytest.raises(ValueError):
            generate_subject(0, 0, (64, 64))

    def test_intra_subject_correlation_exceeds_inter(self):
        # identity signal: same-subject image pairs correlate more than
        # different-subject pairs, mean margin >= 0.1 over 50 subjects
        subjects = [
            generate_subject(subject_seed(77, f"s{i}"), 2, (64, 64))
            for i in range(50)
        ]
        def corr(x, y):
            xf, yf = x.data.ravel(), y.data.ravel()
            return float(np.corrcoef(xf, yf)[0, 1])

        intra = [corr(s.samples[0], s.samples[1]) for s in subjects]
        inter = [
            corr(subjects[i].samples[0], subjects[(i + 1) % 50].samples[0])
            for i in range(50)
        ]
        assert np.mean(intra) - np.mean(inter) >= 0.1


class TestManifest:
    def _write(self, tmp_path, rows, make_files=True):
        path = tmp_path / "manifest.csv"
        lines = ["path,subject_id,sample_idx,split"]
        for rel, subject, idx, split in rows:
            lines.append(f"{rel},{subject},{idx},{split}")
            if make_files:
                target = tmp_path / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.touch()
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_overlapping_splits_rejected(self, tmp_path):
        rows = [
            ("a0.pgm", "a", 0, "enrolled_train"),
            ("a1.pgm", "a", 1, "stolen_train"),
        ]
        path = self._write(tmp_path, rows)
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_hkpu_style_counts_accepted(self, tmp_path):
        # 210 enrolled subjects plus 51/51 stolen train/test subjects
        rows = []
        for i in range(210):
            rows.append((f"e{i}.pgm", f"e{i}", 0, "enrolled_train"))
        for i in range(51):
            rows.append((f"st{i}.pgm", f"st{i}", 0, "stolen_train"))
        for i in range(51):
            rows.append((f"sv{i}.pgm", f"sv{i}", 0, "stolen_test"))
        manifest = load_manifest(self._write(tmp_path, rows))
        assert len(manifest.split["enrolled_train"]) == 210
        assert len(manifest.split["stolen_train"]) == 51
        assert len(manifest.split["stolen_test"]) == 51

    def test_empty_manifest_rejected(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text("path,subject_id,sample_idx,split\n")
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_missing_file_rejected(self, tmp_path):
        path = self._write(
            tmp_path, [("gone.pgm", "a", 0, "enrolled_train")], make_files=False
        )
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_unknown_split_rejected(self, tmp_path):
        path = self._write(tmp_path, [("a.pgm", "a", 0, "holdout")])
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_export_roundtrip(self, tmp_path):
        manifest = export_corpus(tmp_path, 3, n_enrolled=2, n_stolen=2,
                                 n_samples=2, dims=(64, 64))
        loaded = load_manifest(tmp_path / "manifest.csv")
        assert loaded.split == manifest.split
        assert len(loaded.entries) == 8
