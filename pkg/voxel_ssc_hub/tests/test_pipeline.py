"""
Service-level tests: dataset synthesis, training, evaluation, inference
and the gradient suite, plus the long overfitting runs behind ``slow``.
"""

import numpy as np
import pytest
import torch

from app.config import load_config
from app.config.presets import get_preset
from app.losses.metrics import evaluate
from app.networks.occupancy_net import predict_occupancy
from app.services.dataset_service import DatasetService, SceneSample, build_sample, depth_occupancy
from app.services.evaluation_service import EvaluationService, thread_count
from app.services.gradcheck_service import GRADIENT_SUITE, run_case, run_suite
from app.services.inference_service import InferenceService
from app.services.pipeline_service import (build_stage1, build_stage2, load_stage1, load_stage2,
                                           query_mask, run_pipeline)
from app.services.registry_service import RegistryService
from app.services.training_service import TrainingService, loss_log_path
from app.synth.frames import INVALID_DEPTH, DepthRaster
from app.synth.render import frame_offsets
from app.synth.scene import Scene
from app.utils.errors import InvalidInputError, MissingDependencyError
from app.voxel.grid import OccupancyGrid
from app.voxel.io import load_occupancy, load_voxel_grid
from app.voxel.voxelizer import downsample_occupancy
from tests.conftest import TINY_CONFIG, slow


def occupancy_iou(pred: OccupancyGrid, target: OccupancyGrid) -> float:
    union = np.logical_or(pred.bits, target.bits).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred.bits, target.bits).sum() / union)


@pytest.fixture(scope="module")
def samples():
    return [build_sample(TINY_CONFIG, seed=s, name=f"scene_{s:04d}") for s in (3, 4)]


@pytest.fixture(scope="module")
def checkpoints(tmp_path_factory, samples):
    root = tmp_path_factory.mktemp("ckpt")
    service = TrainingService(TINY_CONFIG)
    stage1 = root / "stage1.ckpt"
    stage2 = root / "stage2.ckpt"
    service.train_stage1(samples, stage1, steps=2)
    service.train_stage2(samples, stage2, stage1_checkpoint=stage1, steps=2)
    return stage1, stage2


class TestBuildSample:
    def test_deterministic(self):
        a = build_sample(TINY_CONFIG, seed=11)
        b = build_sample(TINY_CONFIG, seed=11)
        assert a.gt == b.gt
        assert a.m_in == b.m_in
        assert np.array_equal(a.frames[0].pixels, b.frames[0].pixels)

    @pytest.mark.parametrize("frames,mode", [(1, "online"), (2, "online"), (3, "offline")])
    def test_frames_follow_config(self, frames, mode):
        config = TINY_CONFIG.replace(frames=frames, temporal_mode=mode)
        sample = build_sample(config, seed=5)
        assert [f.t for f in sample.frames] == frame_offsets(frames, mode)
        assert len(sample.depths) == frames
        assert sample.images().shape == (frames, 3, config.image_height, config.image_width)

    def test_m_in_comes_from_current_frame(self, tiny_sample):
        assert tiny_sample.m_in == depth_occupancy(tiny_sample.depths[0], TINY_CONFIG)
        assert tiny_sample.m_in.popcount > 0


class TestDatasetService:
    def test_round_trip(self, workdir):
        config = TINY_CONFIG.replace(frames=2)
        service = DatasetService(config)
        manifest = service.synthesize(workdir / "data", count=2, seed=9)
        assert [s['name'] for s in manifest['scenes']] == ["scene_0000", "scene_0001"]

        loaded = service.load(workdir / "data")
        assert len(loaded) == 2
        for entry, sample in zip(manifest['scenes'], loaded):
            original = build_sample(config, entry['seed'], entry['name'])
            assert sample.gt == original.gt
            assert sample.m_in == original.m_in
            for ours, theirs in zip(sample.depths, original.depths):
                assert np.array_equal(ours.values, theirs.values)
            for ours, theirs in zip(sample.frames, original.frames):
                assert ours.t == theirs.t
                assert ours.camera.to_dict() == theirs.camera.to_dict()
                assert np.abs(ours.pixels - theirs.pixels).max() <= 0.5 / 255 + 1e-9

    def test_describe_reads_back_as_the_same_config(self, workdir):
        config = TINY_CONFIG.replace(frames=3, seed=21)
        path = workdir / "described.ini"
        path.write_text(DatasetService(config).describe())
        assert load_config(path) == config

    def test_limit(self, workdir):
        service = DatasetService(TINY_CONFIG)
        service.synthesize(workdir / "data", count=3)
        assert len(service.load(workdir / "data", limit=1)) == 1


class TestPipeline:
    def test_build_is_seeded(self):
        a, b = build_stage2(TINY_CONFIG), build_stage2(TINY_CONFIG)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)
        other = build_stage1(TINY_CONFIG.replace(seed=1))
        assert not all(torch.equal(pa, pb) for pa, pb in zip(build_stage1(TINY_CONFIG).parameters(),
                                                             other.parameters()))

    def test_stage1_only_loaded_when_needed(self):
        assert load_stage1(TINY_CONFIG.replace(query_mode="dense"), None) is None
        with pytest.raises(MissingDependencyError):
            load_stage1(TINY_CONFIG, None)
        with pytest.raises(MissingDependencyError):
            load_stage2(TINY_CONFIG, "/nonexistent/stage2.ckpt")

    def test_run_pipeline(self, samples, checkpoints):
        stage1 = load_stage1(TINY_CONFIG, checkpoints[0])
        stage2 = load_stage2(TINY_CONFIG, checkpoints[1])
        result = run_pipeline(samples[0], TINY_CONFIG, stage2, stage1)
        assert result.logits.shape == (*TINY_CONFIG.dims, TINY_CONFIG.class_count + 1)
        assert torch.isfinite(result.logits).all()
        assert result.prediction.labels.max() <= TINY_CONFIG.class_count
        assert result.proposals == result.m_out.popcount
        again = run_pipeline(samples[0], TINY_CONFIG, stage2, stage1)
        assert torch.equal(result.logits, again.logits)

    def test_random_mask_depends_on_scene_seed(self, samples):
        config = TINY_CONFIG.replace(query_mode="random:50")
        first = query_mask(samples[0], config)
        assert first == query_mask(samples[0], config)
        assert first.popcount == 16

    def test_degenerate_scene_is_total(self):
        config = TINY_CONFIG.replace(query_mode="raw")
        spec = config.volume_spec()
        base = build_sample(config, seed=1)
        camera = base.frames[0].camera
        blank = DepthRaster(np.full(base.depths[0].values.shape, INVALID_DEPTH), camera)
        sample = SceneSample("blank", 1, Scene(spec, config.class_count, 1, []),
                             base.gt, depth_occupancy(blank, config), base.frames, [blank])
        assert sample.m_in.popcount == 0
        result = run_pipeline(sample, config, build_stage2(config))
        assert result.proposals == 0
        assert torch.isfinite(result.logits).all()

    def test_scene_without_objects(self):
        config = TINY_CONFIG.replace(object_min=0, object_max=0, query_mode="oracle")
        sample = build_sample(config, seed=2)
        assert len(sample.scene.objects) == 1
        result = run_pipeline(sample, config, build_stage2(config))
        assert torch.isfinite(result.logits).all()


class TestTrainingService:
    def test_resume_matches_uninterrupted_run(self, samples, workdir):
        service = TrainingService(TINY_CONFIG)
        straight = workdir / "straight.ckpt"
        split = workdir / "split.ckpt"
        service.train_stage1(samples, straight, steps=4)
        service.train_stage1(samples, split, steps=2)
        summary = service.train_stage1(samples, split, steps=4, resume=True)
        assert summary.start_step == 2
        assert len(summary.losses) == 2
        assert split.read_bytes() == straight.read_bytes()
        assert loss_log_path(split).read_text() == loss_log_path(straight).read_text()

    def test_stage2_resume(self, samples, checkpoints, workdir):
        service = TrainingService(TINY_CONFIG)
        straight = workdir / "s2.ckpt"
        split = workdir / "s2_split.ckpt"
        service.train_stage2(samples, straight, stage1_checkpoint=checkpoints[0], steps=3)
        service.train_stage2(samples, split, stage1_checkpoint=checkpoints[0], steps=1)
        service.train_stage2(samples, split, stage1_checkpoint=checkpoints[0], steps=3, resume=True)
        assert split.read_bytes() == straight.read_bytes()

    def test_losses_are_finite_and_logged(self, samples, workdir):
        summary = TrainingService(TINY_CONFIG.replace(query_mode="oracle")).train_stage2(
            samples, workdir / "oracle.ckpt", steps=3)
        assert len(summary.losses) == 3
        assert all(np.isfinite(summary.losses))
        lines = summary.loss_log.read_text().splitlines()
        assert [int(line.split("\t")[0]) for line in lines] == [0, 1, 2]
        assert float(lines[-1].split("\t")[1]) == summary.final_loss

    def test_stage1_loss_falls_window_by_window(self, samples, workdir):
        config = TINY_CONFIG.replace(learning_rate=3e-3)
        summary = TrainingService(config).train_stage1(samples[:1], workdir / "falling.ckpt", steps=50)
        windows = np.asarray(summary.losses).reshape(10, 5).mean(axis=1)
        assert np.all(np.diff(windows) < 0), windows
        assert windows[-1] < windows[0]

    def test_registry_records_run(self, samples, workdir):
        registry = RegistryService()
        summary = TrainingService(TINY_CONFIG, registry, preset="desk").train_stage1(
            samples, workdir / "reg.ckpt", steps=2, dataset_path="memory")
        run = registry.get_run(summary.run_id)
        assert run.status == "finished"
        assert run.steps == 2
        assert run.preset == "desk"
        assert run.final_loss == pytest.approx(summary.final_loss)
        assert list(registry.loss_frame(run.id)['step']) == [0, 1]

    def test_rejects_bad_requests(self, samples, workdir):
        service = TrainingService(TINY_CONFIG)
        with pytest.raises(InvalidInputError):
            service.train_stage1([], workdir / "x.ckpt", steps=1)
        with pytest.raises(InvalidInputError):
            service.train_stage1(samples, workdir / "x.ckpt", steps=-1)
        with pytest.raises(MissingDependencyError):
            service.train_stage2(samples, workdir / "y.ckpt", stage1_checkpoint=workdir / "none.ckpt")


class TestEvaluationService:
    def test_aggregate_sums_scene_confusions(self, samples, checkpoints, workdir):
        summary = EvaluationService(TINY_CONFIG).evaluate(
            samples, checkpoints[0], checkpoints[1], out_dir=workdir / "eval", xlsx=True)
        for range_m in TINY_CONFIG.ranges:
            total = sum(report[range_m].confusion for report in summary.scenes.values())
            assert np.array_equal(summary.aggregate[range_m].confusion, total)
        assert summary.aggregate.scenes == 2
        assert (workdir / "eval" / "aggregate.json").is_file()
        assert (workdir / "eval" / "scene_0003.json").is_file()
        assert (workdir / "eval" / "metrics.xlsx").is_file()

    def test_bypass_is_perfect(self, samples):
        summary = EvaluationService(TINY_CONFIG).evaluate(samples, bypass=True)
        for metrics in summary.aggregate.ranges.values():
            assert metrics.iou == 1.0
            assert metrics.miou == 1.0

    def test_parallel_matches_serial(self, samples, checkpoints, monkeypatch):
        service = EvaluationService(TINY_CONFIG)
        monkeypatch.setenv("SSC_THREADS", "1")
        serial = service.evaluate(samples, *checkpoints)
        monkeypatch.setenv("SSC_THREADS", "2")
        parallel = service.evaluate(samples, *checkpoints)
        for range_m in TINY_CONFIG.ranges:
            assert np.array_equal(serial.aggregate[range_m].confusion,
                                  parallel.aggregate[range_m].confusion)

    def test_needs_scenes(self):
        with pytest.raises(InvalidInputError):
            EvaluationService(TINY_CONFIG).evaluate([], bypass=True)

    @pytest.mark.parametrize("raw", ["zero", "0", "-2"])
    def test_thread_count_rejects(self, raw, monkeypatch):
        monkeypatch.setenv("SSC_THREADS", raw)
        with pytest.raises(InvalidInputError):
            thread_count()

    def test_thread_count_default(self, monkeypatch):
        monkeypatch.delenv("SSC_THREADS", raising=False)
        assert 1 <= thread_count() <= 4
        monkeypatch.setenv("SSC_THREADS", "3")
        assert thread_count() == 3

    def test_registry_rows(self, samples):
        registry = RegistryService()
        before = len(registry.evaluation_frame())
        EvaluationService(TINY_CONFIG, registry).evaluate(samples, bypass=True, label="bypass-check")
        frame = registry.evaluation_frame()
        assert len(frame) == before + len(TINY_CONFIG.ranges)
        assert set(frame['query_mode'].iloc[before:]) == {"bypass"}


class TestInferenceService:
    def test_writes_grids(self, samples, checkpoints, workdir):
        outputs = InferenceService(TINY_CONFIG).infer(samples, checkpoints[0], checkpoints[1], workdir / "out")
        spec = TINY_CONFIG.volume_spec()
        for sample in samples:
            files = outputs[sample.name]
            m_out = load_occupancy(files['m_out'], spec)
            assert m_out.popcount == files['proposals']
            assert load_voxel_grid(files['prediction'], spec).labels.shape == spec.dims


@pytest.mark.parametrize("frames,mode", [(1, "online"), (2, "online"), (3, "online"), (3, "offline")])
def test_temporal_settings_train_and_evaluate(frames, mode, workdir):
    config = TINY_CONFIG.replace(frames=frames, temporal_mode=mode, query_mode="oracle")
    scenes = [build_sample(config, seed=s) for s in (1, 2)]
    checkpoint = workdir / f"temporal_{frames}_{mode}.ckpt"
    TrainingService(config).train_stage2(scenes, checkpoint, steps=2)
    summary = EvaluationService(config).evaluate(scenes, stage2_checkpoint=checkpoint,
                                                 out_dir=workdir / f"eval_{frames}_{mode}")
    assert set(summary.aggregate.ranges) == set(config.ranges)
    assert (workdir / f"eval_{frames}_{mode}" / "aggregate.json").is_file()


@pytest.mark.parametrize("name", sorted(GRADIENT_SUITE))
def test_gradient_suite_case(name):
    report = run_case(name, seed=0, max_coords=12)
    assert report.passed, report.summary()


# Long training runs; enable with SSC_RUN_SLOW=1.

@slow
def test_stage1_overfits_one_scene(workdir):
    config = get_preset("overfit")
    sample = build_sample(config, seed=0)
    checkpoint = workdir / "stage1.ckpt"
    TrainingService(config).train_stage1([sample], checkpoint, steps=2000)
    net = load_stage1(config, checkpoint)
    _, m_out = predict_occupancy(sample.m_in, net, config.threshold)
    target = downsample_occupancy(sample.gt.occupancy(), config.volume_spec())
    assert occupancy_iou(m_out, target) >= 0.95


@slow
def test_stage2_overfits_one_scene(workdir):
    config = get_preset("overfit")
    sample = build_sample(config, seed=0)
    stage1_ckpt, stage2_ckpt = workdir / "stage1.ckpt", workdir / "stage2.ckpt"
    service = TrainingService(config)
    service.train_stage1([sample], stage1_ckpt, steps=2000)
    summary = service.train_stage2([sample], stage2_ckpt, stage1_checkpoint=stage1_ckpt, steps=5000)
    assert all(np.isfinite(summary.losses))

    result = run_pipeline(sample, config, load_stage2(config, stage2_ckpt), load_stage1(config, stage1_ckpt))
    full = max(config.ranges)
    report = evaluate(result.prediction, sample.gt, config.volume_spec(), (full,), config.class_count)
    assert report[full].miou >= 0.90


@slow
def test_occupancy_queries_beat_random_queries(workdir):
    base = get_preset("desk")
    occupancy_scores, random_scores = [], []
    for seed in range(3):
        config = base.replace(seed=seed, stage1_steps=1000)
        train = [build_sample(config, seed=1000 * seed + i) for i in range(20)]
        held_out = [build_sample(config, seed=1000 * seed + 500 + i) for i in range(10)]
        checkpoint = workdir / f"stage1_{seed}.ckpt"
        TrainingService(config).train_stage1(train, checkpoint)
        net = load_stage1(config, checkpoint)
        random_config = config.replace(query_mode="random:10")
        for sample in held_out:
            target = downsample_occupancy(sample.gt.occupancy(), config.volume_spec())
            occupancy_scores.append(occupancy_iou(query_mask(sample, config, net), target))
            random_scores.append(occupancy_iou(query_mask(sample, random_config), target))
    assert np.mean(occupancy_scores) >= np.mean(random_scores)


@slow
def test_full_gradient_suite():
    failures = [(name, seed, report.summary())
                for name, seed, report in run_suite(seeds=10) if not report.passed]
    assert not failures
