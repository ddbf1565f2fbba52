use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use condmon::edge::write_gap_log;
use condmon::experiment::{
    clean_training_dataset, emit_report, params_from_toml, params_to_toml,
    run_detection_experiment, run_migration_experiment, run_simulation, summarize_migrations,
    test_dataset, train_model, tune, ExperimentError, GapStats, Report, Scenario,
    TrainingInjection, Variant, REPORT_FILES,
};
use condmon::gbdt::{
    feature_importance, measure_inference_latency, read_model, write_model, GbdtModel,
};
use condmon::hpo::write_study_log;
use condmon::netsim::SimTime;
use condmon::orchestrator::{write_records, MigrationStore};
use condmon::telemetry::{load_csv, write_csv_file, Dataset};

type Result<T> = std::result::Result<T, ExperimentError>;

/// Minimum number of timed predictions for the latency table.
const LATENCY_PREDICTIONS: usize = 10_000;

pub struct Context {
    s: Scenario,
    out: PathBuf,
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let mut w = BufWriter::new(fs::File::create(path)?);
    f(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

impl Context {
    pub fn new(s: Scenario) -> Result<Self> {
        let out = s.output_dir.clone();
        fs::create_dir_all(&out).map_err(|e| {
            ExperimentError::Config(format!("cannot create {}: {e}", out.display()))
        })?;
        Ok(Self { s, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input(&self, name: &str, stage: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.exists() {
            return Err(ExperimentError::Config(format!(
                "{} not found; run `condmon {stage}` first",
                p.display()
            )));
        }
        Ok(p)
    }

    fn dataset(&self, name: &str, stage: &str) -> Result<Dataset> {
        Ok(load_csv(self.input(name, stage)?)?)
    }

    fn model(&self) -> Result<GbdtModel> {
        let text = fs::read_to_string(self.input("model.txt", "train")?)?;
        read_model(&text).map_err(|e| ExperimentError::Config(format!("model.txt: {e}")))
    }

    pub fn generate(&self) -> Result<()> {
        let train = clean_training_dataset(&self.s)?;
        let test = test_dataset(&self.s)?;
        write_csv_file(&train, self.path("train.csv"))?;
        write_csv_file(&test, self.path("test.csv"))?;
        log::info!(
            "generated {} training and {} test rows",
            train.len(),
            test.len()
        );
        Ok(())
    }

    pub fn inject(&self) -> Result<()> {
        let clean = self.dataset("train.csv", "generate")?;
        let inj = TrainingInjection::for_rows(&self.s, clean.len())?;
        let labeled = inj.apply(&clean)?;
        write_csv_file(&labeled, self.path("train_labeled.csv"))?;
        fs::write(self.path("anomaly_sparse.txt"), inj.sparse.to_text())?;
        fs::write(
            self.path("anomaly_collective.txt"),
            format!(
                "# start_index = {}\n{}",
                inj.collective_start,
                inj.collective.to_text()
            ),
        )?;
        log::info!(
            "labeled {} of {} training rows",
            labeled.anomaly_count(),
            labeled.len()
        );
        Ok(())
    }

    pub fn tune(&self) -> Result<()> {
        let train = self.dataset("train_labeled.csv", "inject")?;
        let outcome = tune(&self.s, &train)?;
        write_with(&self.path("study.csv"), |w| {
            write_study_log(&outcome.trials, w, true)
        })?;
        fs::write(
            self.path("best_params.toml"),
            params_to_toml(&outcome.params),
        )?;
        log::info!(
            "{} trials, best parameters in best_params.toml",
            outcome.trials.len()
        );
        Ok(())
    }

    pub fn train(&self) -> Result<()> {
        let train = self.dataset("train_labeled.csv", "inject")?;
        let best = self.path("best_params.toml");
        let params = if best.exists() {
            params_from_toml(&fs::read_to_string(&best)?)?
        } else {
            self.s.params
        };
        let model = train_model(&self.s, &train, params)?;
        fs::write(self.path("model.txt"), write_model(&model))?;
        let importance = feature_importance(&model);
        write_with(&self.path("feature_importance.csv"), |w| {
            use std::io::Write;
            writeln!(w, "feature,importance")?;
            for (name, v) in model.feature_names.iter().zip(&importance) {
                writeln!(w, "{name},{v}")?;
            }
            Ok(())
        })?;
        log::info!("trained {} trees", model.trees.len());
        Ok(())
    }

    pub fn evaluate(&self) -> Result<()> {
        let model = self.model()?;
        let test = self.dataset("test.csv", "generate")?;
        let mut report = Report::load(&self.out)?;
        report.detection = run_detection_experiment(&self.s, &model, &test)?;
        if !test.is_empty() {
            let reps = LATENCY_PREDICTIONS.div_ceil(test.len());
            report.inference = Some(measure_inference_latency(&model, &test, reps)?);
        }
        emit_report(&report, &self.out)
    }

    fn variants(&self) -> Vec<Variant> {
        if self.s.orchestrator.include_mediator {
            Variant::ALL.to_vec()
        } else {
            vec![Variant::WithoutMediator]
        }
    }

    pub fn simulate(&self) -> Result<()> {
        let model = self.model()?;
        let test = self.dataset("test.csv", "generate")?;
        let mut report = Report::load(&self.out)?;
        let inference_time = match report.inference {
            Some(l) => SimTime::from_secs_f64(l.mean),
            None => SimTime::from_secs_f64(measure_inference_latency(&model, &test, 1)?.mean),
        };

        let log_path = self.path("migrations.csv");
        if log_path.exists() {
            fs::remove_file(&log_path)?;
        }
        let store = MigrationStore::open(&log_path)?;
        let sim = run_simulation(
            &self.s,
            &model,
            test.records(),
            inference_time,
            self.s.orchestrator.include_mediator,
            Some(store),
        )?;
        write_with(&self.path("events.csv"), |w| sim.events.write_csv(w))?;
        write_with(&self.path("placements.csv"), |w| {
            condmon::edge::write_placement_log(&sim.placements, w)
        })?;
        write_with(&self.path("messages.csv"), |w| {
            write_gap_log(&sim.outcomes, w)
        })?;
        report.gaps = Some(GapStats::from_outcomes(&sim.outcomes));
        log::info!(
            "simulated {} migrations, {} uplink messages",
            sim.records.len(),
            sim.outcomes.len()
        );

        let mut all_runs = Vec::new();
        report.migration.clear();
        for v in self.variants() {
            if self.s.migration_runs == 0 {
                break;
            }
            let exp = run_migration_experiment(&self.s, self.s.migration_runs, v)?;
            report
                .migration
                .push(summarize_migrations(v, &exp.records)?);
            all_runs.push((v, exp.records));
        }
        write_with(&self.path("migration_runs.csv"), |w| {
            use std::io::Write;
            writeln!(w, "variant,{}", condmon::orchestrator::MIGRATION_LOG_HEADER)?;
            for (v, records) in &all_runs {
                let mut buf = Vec::new();
                write_records(records, &mut buf)?;
                for line in String::from_utf8_lossy(&buf).lines().skip(1) {
                    writeln!(w, "{},{line}", v.name())?;
                }
            }
            Ok(())
        })?;
        emit_report(&report, &self.out)
    }

    pub fn report(&self) -> Result<()> {
        let report = Report::load(&self.out)?;
        emit_report(&report, &self.out)?;
        print!("{}", fs::read_to_string(self.path(REPORT_FILES[4]))?);
        Ok(())
    }

    pub fn all(&self) -> Result<()> {
        self.generate()?;
        self.inject()?;
        self.tune()?;
        self.train()?;
        self.evaluate()?;
        self.simulate()?;
        self.report()
    }
}
