import numpy as np
import pytest

import texdefect as td
from texdefect import detector as det
from texdefect.fourier import highpass_filter
from texdefect.image import to_grayscale
from texdefect.synthgen import DefectSpec, inject_defect


def params(**kw):
    defaults = dict(tau=4, th=6.0, border=10, scale=255.0)
    defaults.update(kw)
    return det.DetectionParams(**defaults)


class TestDifferenceMap:
    def test_identical_inputs_give_zero_map(self):
        f = np.random.default_rng(0).random((32, 32))
        assert np.all(det.difference_map(f, f, params()) == 0.0)

    def test_single_interior_pixel_scales_to_threshold_units(self):
        a = np.zeros((32, 32))
        b = np.zeros((32, 32))
        a[16, 16], b[16, 16] = 0.5, 0.3
        diff = det.difference_map(a, b, params())
        assert diff.shape == (12, 12)
        assert diff[6, 6] == pytest.approx(51.0)
        assert diff.sum() == pytest.approx(51.0)

    def test_border_differences_are_excluded(self):
        a = np.zeros((32, 32))
        b = a.copy()
        b[:10, :] = 1.0
        b[:, -10:] = 1.0
        assert np.all(det.difference_map(a, b, params()) == 0.0)

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(1)
        a, b = rng.random((32, 32)), rng.random((32, 32))
        assert np.array_equal(
            det.difference_map(a, b, params()), det.difference_map(b, a, params())
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            det.difference_map(np.zeros((32, 32)), np.zeros((16, 16)), params())

    def test_border_must_leave_interior(self):
        with pytest.raises(ValueError):
            det.difference_map(np.zeros((16, 16)), np.zeros((16, 16)), params(border=8))


class TestBinarizeAndScore:
    def test_value_exactly_at_threshold_is_zero(self):
        assert det.binarize(np.array([13.0]), 13.0).tolist() == [0]

    def test_strict_comparison_on_small_map(self):
        out = det.binarize(np.array([0.0, 5.0, 13.0, 14.0]), 13.0)
        assert out.tolist() == [0, 0, 0, 1]

    def test_zero_threshold_marks_positives(self):
        out = det.binarize(np.array([0.0, 0.1, 2.0]), 0.0)
        assert out.tolist() == [0, 1, 1]

    def test_score_counts_ones(self):
        m = np.zeros((9, 9), dtype=np.uint8)
        m.ravel()[[1, 5, 7, 11, 20, 40, 77]] = 1
        assert det.defect_score(m) == 7

    def test_score_matches_independent_fold(self):
        m = det.binarize(np.random.default_rng(2).random((12, 12)) * 20, 10.0)
        assert det.defect_score(m) == sum(int(v) for v in m.ravel())

    def test_all_zero_map(self):
        assert det.defect_score(np.zeros((5, 5))) == 0


class TestNormalize:
    def _records(self, counts):
        return [det.ScoreRecord(f"i{k}", "normal", c) for k, c in enumerate(counts)]

    def test_min_max_formula(self):
        out = det.normalize_scores(self._records([2, 5, 10]))
        assert [r.normalized for r in out] == [0.0, 0.375, 1.0]

    def test_single_record_degenerate(self):
        assert det.normalize_scores(self._records([42]))[0].normalized == 0.0

    def test_ranking_preserved(self):
        counts = [9, 1, 7, 7, 3]
        out = det.normalize_scores(self._records(counts))
        assert np.argsort([r.normalized for r in out]).tolist() == np.argsort(counts).tolist()

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            det.normalize_scores([])

    def test_originals_untouched(self):
        recs = self._records([1, 2])
        det.normalize_scores(recs)
        assert all(r.normalized is None for r in recs)


class TestTemplates:
    def test_build_cardinality_and_shape(self, tiny_model, tiny_corpus):
        images = [img for _, img in tiny_corpus.train[:3]]
        ids = [i for i, _ in tiny_corpus.train[:3]]
        templates = det.build_templates(tiny_model, images, ids=ids)
        assert len(templates) == 3
        for t, i in zip(templates, ids):
            assert t.source_id == i
            assert t.reconstruction.shape == (32, 32, 1)

    def test_build_rejects_empty(self, tiny_model):
        with pytest.raises(ValueError):
            det.build_templates(tiny_model, [])

    def test_filtered_cache_reused_and_tau_sensitive(self, tiny_model, tiny_corpus):
        tmpl = det.build_templates(tiny_model, [tiny_corpus.train[0][1]])[0]
        f4 = tmpl.filtered(4)
        assert tmpl.filtered(4) is f4
        assert not np.array_equal(tmpl.filtered(8), f4)

    def test_overfit_template_close_to_source(self, overfit_pair):
        model, img = overfit_pair
        tmpl = det.build_templates(model, [img])[0]
        mae = float(np.mean(np.abs(tmpl.reconstruction - to_grayscale(img))))
        assert mae < 0.05

    def test_single_candidate_selected(self, tiny_model, tiny_corpus):
        tmpl = det.build_templates(tiny_model, [tiny_corpus.train[0][1]])[0]
        holdouts = [img for _, img in tiny_corpus.test_normal]
        assert det.select_template([tmpl], holdouts, tiny_model, params()) is tmpl

    def test_zero_count_candidate_wins(self, tiny_model, tiny_corpus):
        holdout = tiny_corpus.test_normal[0][1]
        perfect_recon = to_grayscale(td.forward(tiny_model, [holdout])[0])
        perfect = det.NormalTemplate("aaa", holdout, perfect_recon)
        other = det.build_templates(
            tiny_model, [tiny_corpus.train[0][1]], ids=["zzz"]
        )[0]
        chosen = det.select_template([other, perfect], [holdout], tiny_model, params())
        assert chosen is perfect

    def test_blemished_template_loses_to_clean(self, tiny_model, tiny_corpus):
        clean_img = tiny_corpus.train[0][1]
        clean = det.build_templates(tiny_model, [clean_img], ids=["clean"])[0]
        blem_recon, _ = inject_defect(
            clean.reconstruction, DefectSpec(kind="blob", extent=6, contrast=0.6, seed=17)
        )
        blemished = det.NormalTemplate("blemished", clean_img, blem_recon)
        holdouts = [img for _, img in tiny_corpus.test_normal]
        chosen = det.select_template([blemished, clean], holdouts, tiny_model, params())
        assert chosen is clean

    def test_select_requires_inputs(self, tiny_model, tiny_corpus):
        tmpl = det.build_templates(tiny_model, [tiny_corpus.train[0][1]])[0]
        with pytest.raises(ValueError):
            det.select_template([], [tiny_corpus.test_normal[0][1]], tiny_model, params())
        with pytest.raises(ValueError):
            det.select_template([tmpl], [], tiny_model, params())


class TestDetect:
    @pytest.fixture()
    def template(self, tiny_model, tiny_corpus):
        return det.build_templates(tiny_model, [tiny_corpus.train[0][1]])[0]

    def test_deterministic(self, tiny_model, template, tiny_corpus):
        img = tiny_corpus.test_defect[0][1]
        a = det.detect(img, tiny_model, template, params())
        b = det.detect(img, tiny_model, template, params())
        assert a.raw_count == b.raw_count

    def test_full_mask_forces_zero_count(self, tiny_model, template, tiny_corpus):
        img = tiny_corpus.test_defect[0][1]
        rec = det.detect(img, tiny_model, template, params(tau=32))
        assert rec.raw_count == 0

    def test_count_monotone_nonincreasing_in_th(self, tiny_model, template, tiny_corpus):
        img = tiny_corpus.test_defect[0][1]
        counts = [
            det.detect(img, tiny_model, template, params(th=th)).raw_count
            for th in (0.0, 2.0, 5.0, 10.0, 20.0, 300.0)
        ]
        assert counts == sorted(counts, reverse=True)
        assert counts[-1] == 0

    def test_overfit_source_scores_near_zero(self, overfit_pair):
        model, img = overfit_pair
        tmpl = det.build_templates(model, [img])[0]
        rec = det.detect(img, model, tmpl, params(tau=4, th=6.0))
        interior = (32 - 20) ** 2
        assert rec.raw_count < 0.01 * interior

    def test_border_pixels_cannot_affect_count(self, tiny_model, template, tiny_corpus):
        img = tiny_corpus.test_normal[0][1]
        fi = highpass_filter(to_grayscale(td.forward(tiny_model, [img])[0]), 4)
        ft = template.filtered(4)
        base = det.defect_score(det.binarize(det.difference_map(fi, ft, params()), 6.0))
        poked = fi.copy()
        poked[0, 0] = poked[5, 31] = poked[31, 7] = 123.0
        after = det.defect_score(det.binarize(det.difference_map(poked, ft, params()), 6.0))
        assert base == after

    def test_defect_counts_exceed_normal_counts_at_best_cell(self, tiny_model, template, tiny_corpus):
        from texdefect import evaluation as ev

        table = ev.grid_search(
            tiny_corpus, tiny_model, template, [2, 4, 6], [2.0, 6.0, 12.0], params=params()
        )
        best = params(tau=table.best.tau, th=table.best.th)
        normal = [
            det.detect(img, tiny_model, template, best).raw_count
            for _, img in tiny_corpus.test_normal
        ]
        defect = [
            det.detect(img, tiny_model, template, best).raw_count
            for _, img in tiny_corpus.test_defect
        ]
        assert np.mean(defect) > np.mean(normal)

    def test_score_images_normalizes_and_keeps_order(self, tiny_model, template, tiny_corpus):
        items = [(i, "normal", img) for i, img in tiny_corpus.test_normal]
        items += [(i, "defect", img) for i, img in tiny_corpus.test_defect]
        records = det.score_images(tiny_model, template, params(), items)
        assert [r.image_id for r in records] == [i for i, _, _ in items]
        assert all(r.normalized is not None and 0 <= r.normalized <= 1 for r in records)
        threaded = det.score_images(tiny_model, template, params(), items, threads=3)
        assert [r.raw_count for r in threaded] == [r.raw_count for r in records]
