//! Mini-batch training over the physics, data and hybrid regimes.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::eval::evaluate;
use super::metrics::{write_metrics, MetricsRecord};
use crate::autodiff::{adam_step, lr_at, DiffTensor, Gradients, Tape};
use crate::error::{Error, Result};
use crate::model::{init_model, wno_forward, WnoModel};
use crate::physics::{LossBreakdown, Mode, PhysicsOps, ProblemSpec};
use crate::problems::Dataset;

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Lowest validation error seen (lowest training loss without
    /// validation data).
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub metrics: Vec<MetricsRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn check_dataset(spec: &ProblemSpec, data: &Dataset, role: &str) -> Result<()> {
    let ds = data.spec();
    if ds.id != spec.id {
        return Err(Error::Config(format!("{role} dataset is {}, run is {}", ds.id, spec.id)));
    }
    if ds.grid != spec.grid || ds.input_len() != spec.input_len() || ds.output_len() != spec.output_len() {
        return Err(Error::Config(format!("{role} dataset grid or frame layout differs from the run")));
    }
    Ok(())
}

/// Loss gradient of one sample. Solutions are only consulted when the mode
/// has a data term.
fn sample_gradient(
    model: &WnoModel,
    phys: &PhysicsOps,
    encoded: &[f64],
    raw: &[f64],
    solution: Option<&[f64]>,
    mode: Mode,
) -> Result<(Gradients, LossBreakdown)> {
    let mut tape = Tape::new(&model.store);
    let a = tape.constant(DiffTensor::new(vec![model.cfg.points(), model.cfg.in_channels], encoded.to_vec())?);
    let u = wno_forward(&mut tape, model, model.ops(), a)?;
    let (total, nodes) = phys.sample_loss(&mut tape, u, raw, solution, mode)?;
    let parts = nodes.read(&tape);
    if !parts.total.is_finite() {
        return Err(Error::NonFinite { op: "sample loss" });
    }
    Ok((tape.backward(total)?, parts))
}

/// Runs the configured number of epochs on `train`, validating on `val`.
/// `on_epoch` sees every metrics record as it is produced.
pub fn train(
    cfg: &TrainConfig,
    train: &Dataset,
    val: Option<&Dataset>,
    mut on_epoch: impl FnMut(&MetricsRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let spec = cfg.spec();
    check_dataset(&spec, train, "training")?;
    if let Some(v) = val {
        check_dataset(&spec, v, "validation")?;
        if !v.has_solutions() {
            return Err(Error::Config("validation dataset has no solutions".into()));
        }
    }
    if cfg.mode.needs_solutions() && !train.has_solutions() {
        return Err(Error::Config(format!(
            "{} mode needs a training dataset with solutions",
            cfg.mode.as_str()
        )));
    }
    if train.count == 0 {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let phys = PhysicsOps::new(&spec, &cfg.stencil, cfg.inset)?;
    let mut model = init_model(&cfg.model, cfg.model_seed)?;
    let encoded: Vec<Vec<f64>> = (0..train.count)
        .map(|k| spec.encode(train.input(k)))
        .collect::<Result<_>>()?;
    let with_data = cfg.mode != Mode::Physics;

    let start = Instant::now();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let snapshot = |model: &WnoModel, epoch: usize, m: Option<MetricsRecord>| Checkpoint {
        config: cfg.clone(),
        spec: spec.clone(),
        model: model.clone(),
        epoch,
        metrics: m,
    };
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train.count).collect();

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, &cfg.optim);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.data_seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut sums = LossBreakdown::default();
        for batch in order.chunks(cfg.batch) {
            let results: Vec<Result<(Gradients, LossBreakdown)>> = batch
                .par_iter()
                .map(|&k| {
                    let sol = if with_data { train.solution(k) } else { None };
                    sample_gradient(&model, &phys, &encoded[k], train.input(k), sol, cfg.mode)
                })
                .collect();
            let mut grads = model.store.zero_grads();
            for r in results {
                let (g, parts) = r.map_err(|e| Error::Divergence { epoch, detail: e.to_string() })?;
                grads.accumulate(&g);
                sums.add_scaled(&parts, 1.0);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut model.store, &grads, lr, &cfg.optim)
                .map_err(|e| Error::Divergence { epoch, detail: e.to_string() })?;
        }
        let n = train.count as f64;
        let mean_total = sums.total / n;
        let validate_now = (epoch + 1) % cfg.val_every == 0 || epoch + 1 == cfg.epochs;
        let (vm, vs) = match val {
            Some(v) if validate_now => {
                let r = evaluate(&model, &spec, v)?;
                (r.mean, r.std)
            }
            _ => (f64::NAN, f64::NAN),
        };
        let record = MetricsRecord {
            epoch,
            loss_pde: sums.pde / n,
            loss_bc: sums.bc / n,
            loss_ic: sums.ic / n,
            loss_data: sums.data / n,
            rel_mse_val_mean: vm,
            rel_mse_val_std: vs,
            lr,
            wall_s: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch:>5} loss {mean_total:.4e} pde {:.3e} bc {:.3e} ic {:.3e} data {:.3e} val {:.4e} lr {lr:.2e}",
            record.loss_pde,
            record.loss_bc,
            record.loss_ic,
            record.loss_data,
            vm
        );
        on_epoch(&record);
        let score = if val.is_some() { vm } else { mean_total };
        if !score.is_nan() && best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, snapshot(&model, epoch, Some(record.clone()))));
        }
        metrics.push(record);
        if cfg.stop_loss > 0.0 && mean_total < cfg.stop_loss {
            stopped_early = true;
            break;
        }
    }
    let last_epoch = metrics.last().map(|m| m.epoch).unwrap_or(0);
    let last = snapshot(&model, last_epoch, metrics.last().cloned());
    let (best_epoch, best) = match best {
        Some((_, ck)) => (ck.epoch, ck),
        None => (last_epoch, last.clone()),
    };
    Ok(TrainOutcome { best, last, metrics, best_epoch, stopped_early })
}

/// Loads the configured datasets, trains, and writes `metrics.csv`,
/// `best.pwck`, `last.pwck` and `config.cfg` to the output directory.
pub fn train_run(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let train_path = cfg
        .train_data
        .as_ref()
        .ok_or_else(|| Error::Config("run.train dataset path is required".into()))?;
    let train_ds = Dataset::load(train_path)?;
    let val_ds = cfg.val_data.as_ref().map(|p| Dataset::load(p)).transpose()?;
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.cfg"), cfg.to_text())?;
    let outcome = train(cfg, &train_ds, val_ds.as_ref(), |_| {})?;
    write_outputs(out, &outcome)?;
    Ok(outcome)
}

pub fn write_outputs(dir: &Path, outcome: &TrainOutcome) -> Result<()> {
    write_metrics(&dir.join("metrics.csv"), &outcome.metrics)?;
    outcome.best.save(&dir.join("best.pwck"))?;
    outcome.last.save(&dir.join("last.pwck"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::ProblemId;
    use crate::problems::build_dataset;

    fn tiny(problem: ProblemId) -> TrainConfig {
        let mut c = TrainConfig::new(problem);
        c.model.lift_dim = 4;
        c.model.proj_hidden = 8;
        c.model.blocks = 1;
        c.model.levels = 2;
        c.epochs = 2;
        c.batch = 2;
        c
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut c = tiny(ProblemId::Poisson);
        c.epochs = 1;
        c.optim.lr0 = 0.0;
        let ds = build_dataset(ProblemId::Poisson, 3, 0, false).unwrap();
        let out = train(&c, &ds, None, |_| {}).unwrap();
        let init = init_model(&c.model, c.model_seed).unwrap();
        for ((_, a), (_, b)) in init.store.iter().zip(out.last.model.store.iter()) {
            assert_eq!(a.tensor().values(), b.tensor().values());
        }
        assert_eq!(out.metrics.len(), 1);
        assert!(out.metrics[0].loss_pde > 0.0);
    }

    #[test]
    fn data_mode_needs_solutions() {
        let mut c = tiny(ProblemId::Poisson);
        c.mode = Mode::Data;
        let ds = build_dataset(ProblemId::Poisson, 2, 0, false).unwrap();
        assert!(matches!(train(&c, &ds, None, |_| {}), Err(Error::Config(_))));
        c.mode = Mode::Hybrid;
        assert!(matches!(train(&c, &ds, None, |_| {}), Err(Error::Config(_))));
    }

    #[test]
    fn physics_mode_runs_without_solutions_and_is_deterministic() {
        let c = tiny(ProblemId::Burgers);
        let ds = build_dataset(ProblemId::Burgers, 3, 1, false).unwrap();
        let val = build_dataset(ProblemId::Burgers, 2, 9, true).unwrap();
        let a = train(&c, &ds, Some(&val), |_| {}).unwrap();
        let b = train(&c, &ds, Some(&val), |_| {}).unwrap();
        for (x, y) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!((x.loss_pde, x.rel_mse_val_mean), (y.loss_pde, y.rel_mse_val_mean));
        }
        let best = a.metrics.iter().map(|m| m.rel_mse_val_mean).fold(f64::INFINITY, f64::min);
        assert_eq!(a.best.metrics.as_ref().unwrap().rel_mse_val_mean, best);
    }

    #[test]
    fn mismatched_dataset_rejected() {
        let c = tiny(ProblemId::Poisson);
        let ds = build_dataset(ProblemId::Burgers, 2, 0, false).unwrap();
        assert!(matches!(train(&c, &ds, None, |_| {}), Err(Error::Config(_))));
    }

    #[test]
    fn early_stop_threshold() {
        let mut c = tiny(ProblemId::Poisson);
        c.epochs = 5;
        c.stop_loss = 1e300;
        let ds = build_dataset(ProblemId::Poisson, 2, 0, false).unwrap();
        let out = train(&c, &ds, None, |_| {}).unwrap();
        assert!(out.stopped_early);
        assert_eq!(out.metrics.len(), 1);
    }
}
