import numpy as np
import pytest
from scipy import ndimage

from scriptorium.imaging import (
    DegradationRecipe,
    RecipeError,
    binarize,
    default_recipes,
    degrade,
    deskew,
    expand_ground_truth,
    identity_recipe,
    otsu_threshold,
    read_gray,
    segment_lines,
    write_gray,
)
from scriptorium.project import LineOrigin, LineRecord, LineStatus, open_project


def oracle_otsu(img):
    # exhaustive search over all 256 thresholds, straight from the
    # between-class variance definition
    pixels = img.ravel().astype(np.float64)
    best_t, best_score = -1, -1.0
    for t in range(256):
        c0 = pixels[pixels <= t]
        c1 = pixels[pixels > t]
        if len(c0) == 0 or len(c1) == 0:
            continue
        w0 = len(c0) / len(pixels)
        w1 = len(c1) / len(pixels)
        score = w0 * w1 * (c0.mean() - c1.mean()) ** 2
        if score > best_score + 1e-12:
            best_t, best_score = t, score
    return best_t


def _text_page(rows=(20, 50, 80), width=160, height=120, bar_height=8):
    img = np.zeros((height, width), dtype=bool)
    for top in rows:
        img[top : top + bar_height, 10 : width - 10] = True
    return img


def test_binarize_two_tone():
    img = np.full((10, 10), 255, dtype=np.uint8)
    img[2:5, 3:7] = 0
    mask = binarize(img)
    assert np.array_equal(mask, img == 0)


def test_binarize_gradient_matches_bruteforce():
    img = np.tile(np.arange(256, dtype=np.uint8), (4, 1))
    assert otsu_threshold(img) == oracle_otsu(img)


def test_binarize_random_images_match_bruteforce():
    rng = np.random.default_rng(5)
    for _ in range(20):
        img = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        assert otsu_threshold(img) == oracle_otsu(img)


def test_binarize_uniform_is_all_background():
    img = np.full((8, 8), 128, dtype=np.uint8)
    assert not binarize(img).any()


def test_binarize_idempotent_when_refed_as_gray():
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, size=(24, 24), dtype=np.uint8)
    mask = binarize(img)
    as_gray = np.where(mask, 0, 255).astype(np.uint8)
    assert np.array_equal(binarize(as_gray), mask)


def test_binarize_sauvola_picks_dark_text():
    img = np.full((40, 40), 200, dtype=np.uint8)
    img[10:14, 5:35] = 30
    mask = binarize(img, method="sauvola", window=15, k=0.2)
    assert mask[11, 20]
    assert not mask[30, 20]


def test_deskew_horizontal_is_zero():
    angle, out = deskew(_text_page())
    assert angle == 0.0
    assert np.array_equal(out, _text_page())


def test_deskew_blank_is_zero():
    blank = np.zeros((50, 50), dtype=bool)
    angle, out = deskew(blank)
    assert angle == 0.0
    assert np.array_equal(out, blank)


def test_deskew_recovers_synthetic_rotation():
    page = _text_page().astype(float)
    rotated = ndimage.rotate(page, 3.0, reshape=False, order=1) > 0.5
    angle, _ = deskew(rotated)
    assert abs(angle + 3.0) <= 0.2


@pytest.mark.parametrize("applied", [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0])
def test_deskew_residual_bound(applied):
    page = _text_page().astype(float)
    rotated = ndimage.rotate(page, applied, reshape=False, order=1) > 0.5
    angle, _ = deskew(rotated, range_deg=3.5)
    assert abs(angle + applied) <= 0.2


def test_segment_three_bars():
    img = np.zeros((100, 60), dtype=bool)
    bars = [(10, 20), (40, 50), (70, 80)]
    for y0, y1 in bars:
        img[y0:y1, 5:55] = True
    boxes = segment_lines(img, min_gap_px=4)
    assert len(boxes) == 3
    for (x0, y0, x1, y1), (want_y0, want_y1) in zip(boxes, bars):
        assert (x0, x1) == (5, 55)
        assert y0 == want_y0
        assert y1 == want_y1


def test_segment_blank():
    assert segment_lines(np.zeros((30, 30), dtype=bool)) == []


def test_segment_merges_small_gap():
    img = np.zeros((40, 30), dtype=bool)
    img[10:14, 2:28] = True
    img[16:20, 2:28] = True  # 2-row gap < min_gap_px
    boxes = segment_lines(img, min_gap_px=4)
    assert len(boxes) == 1
    img2 = np.zeros((40, 30), dtype=bool)
    img2[10:14, 2:28] = True
    img2[26:30, 2:28] = True
    assert len(segment_lines(img2, min_gap_px=4)) == 2


def test_segment_boxes_sorted_and_disjoint():
    rng = np.random.default_rng(0)
    img = rng.random((120, 40)) < 0.03
    boxes = segment_lines(img.astype(bool), min_gap_px=3)
    tops = [b[1] for b in boxes]
    assert tops == sorted(tops)
    for (_, _, _, prev_y1), (_, y0, _, _) in zip(boxes, boxes[1:]):
        assert y0 >= prev_y1


@pytest.fixture
def line_img():
    rng = np.random.default_rng(42)
    img = np.full((24, 80), 235, dtype=np.uint8)
    img[8:16, 10:70] = rng.integers(0, 60, size=(8, 60), dtype=np.uint8)
    return img


def test_degrade_identity(line_img):
    assert np.array_equal(degrade(line_img, identity_recipe()), line_img)


def test_degrade_deterministic(line_img):
    for recipe in default_recipes(seed=9):
        a = degrade(line_img, recipe)
        b = degrade(line_img, recipe)
        assert np.array_equal(a, b), recipe.kind
        assert a.shape == line_img.shape


def test_degrade_seed_changes_random_kinds(line_img):
    r1 = DegradationRecipe("holes", {"count": 6, "radius": 3}, seed=1)
    r2 = DegradationRecipe("holes", {"count": 6, "radius": 3}, seed=2)
    assert not np.array_equal(degrade(line_img, r1), degrade(line_img, r2))


def test_degrade_bleedthrough_matches_pointwise_oracle(line_img):
    alpha = 0.3
    out = degrade(line_img, DegradationRecipe("bleedthrough", {"alpha": alpha}))
    donor = line_img[:, ::-1].astype(np.float64)
    expected = np.minimum(
        line_img.astype(np.float64), alpha * donor + (1 - alpha) * 255.0
    )
    assert np.array_equal(out, np.clip(np.rint(expected), 0, 255).astype(np.uint8))


def test_degrade_out_of_range_params(line_img):
    with pytest.raises(RecipeError):
        degrade(line_img, DegradationRecipe("bleedthrough", {"alpha": 1.5}))
    with pytest.raises(RecipeError):
        degrade(line_img, DegradationRecipe("blur", {"variant": 9, "radius": 1}))
    with pytest.raises(RecipeError):
        degrade(line_img, DegradationRecipe("nonsense"))


def _store_lines(tmp_path, n):
    project = open_project(tmp_path / "proj")
    img = np.full((8, 24), 220, dtype=np.uint8)
    img[3:6, 4:20] = 10
    records = []
    for i in range(n):
        rec = LineRecord(id=f"{i:04d}", gt_text=f"text {i}", status=LineStatus.CORRECTED)
        records.append(project.save_line(rec, image=img))
    return project, records


def test_expand_multiplier_one_identity(tmp_path):
    _, records = _store_lines(tmp_path, 3)
    out = expand_ground_truth(records, 1, [identity_recipe()], seed=0)
    assert len(out) == 3
    for syn, parent in zip(out, records):
        assert syn.origin is LineOrigin.SYNTHETIC
        assert syn.parent_id == parent.id
        assert syn.gt_text == parent.gt_text
        assert np.array_equal(read_gray(syn.image_path), read_gray(parent.image_path))


def test_expand_counts_and_parent_text(tmp_path):
    _, records = _store_lines(tmp_path, 20)
    out = expand_ground_truth(records, 9, default_recipes(), seed=4)
    assert len(out) == 20 * 9
    by_parent = {}
    for syn in out:
        by_parent.setdefault(syn.parent_id, []).append(syn)
        assert syn.gt_text == f"text {int(syn.parent_id)}"
    assert all(len(v) == 9 for v in by_parent.values())


def test_expand_rejects_bad_input(tmp_path):
    _, records = _store_lines(tmp_path, 1)
    with pytest.raises(ValueError):
        expand_ground_truth(records, 0, [identity_recipe()])
    bare = LineRecord(id="x")
    with pytest.raises(ValueError):
        expand_ground_truth([bare], 2, [identity_recipe()])


def test_expand_deterministic(tmp_path):
    _, records = _store_lines(tmp_path, 2)
    out1 = expand_ground_truth(records, 4, default_recipes(), seed=7, out_dir=tmp_path / "a")
    out2 = expand_ground_truth(records, 4, default_recipes(), seed=7, out_dir=tmp_path / "b")
    for a, b in zip(out1, out2):
        assert np.array_equal(read_gray(a.image_path), read_gray(b.image_path))


def test_png_round_trip(tmp_path):
    img = np.arange(64, dtype=np.uint8).reshape(8, 8)
    write_gray(img, tmp_path / "x.png")
    assert np.array_equal(read_gray(tmp_path / "x.png"), img)
