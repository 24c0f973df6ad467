use std::path::PathBuf;

use nlbiplot::{Algorithm, EmConfig, NominalDataset};
use nlbiplot_cli::artifacts::{PointsFile, TessellationFile};
use nlbiplot_cli::commands::{self, GeometryOptions};
use nlbiplot_cli::error::{exit, CliError};
use nlbiplot_cli::input::{code_table, load_csv, read_table};
use nlbiplot_cli::model_file::{LoadedModel, ModelFile};

fn terschelling_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/terschelling.csv")
}

fn terschelling() -> NominalDataset {
    load_csv(&terschelling_path(), Some("farm")).unwrap()
}

fn fitted() -> (commands::FitOutcome, LoadedModel) {
    let outcome = commands::fit(&terschelling(), &EmConfig::default()).unwrap();
    let loaded = ModelFile::from_json(&outcome.json).unwrap().resolve().unwrap();
    (outcome, loaded)
}

#[test]
fn bundled_table_has_twenty_farms_and_four_variables() {
    let ds = terschelling();
    assert_eq!(ds.n_rows(), 20);
    assert_eq!(ds.var_names(), ["moisture", "management", "use", "manure"]);
    assert_eq!(ds.level_counts(), vec![4, 4, 3, 5]);
    assert_eq!(ds.row_ids()[0], "1");
    assert_eq!(ds.row_ids()[19], "20");
}

#[test]
fn model_json_round_trip_is_byte_identical() {
    let (outcome, _) = fitted();
    let reparsed = ModelFile::from_json(&outcome.json).unwrap();
    assert_eq!(reparsed, outcome.file);
    assert_eq!(reparsed.to_json().unwrap(), outcome.json);
    let loaded = reparsed.resolve().unwrap();
    let again = ModelFile::new(&loaded.dataset, &loaded.config, &loaded.model);
    assert_eq!(again.to_json().unwrap(), outcome.json);
}

#[test]
fn fits_are_deterministic() {
    let (a, la) = fitted();
    let (b, lb) = fitted();
    assert_eq!(a.json, b.json);
    let opts = GeometryOptions::default();
    assert_eq!(
        commands::plots(&la, &opts, Algorithm::Combined).unwrap(),
        commands::plots(&lb, &opts, Algorithm::Combined).unwrap()
    );
}

#[test]
fn tampered_model_files_are_rejected() {
    let (outcome, _) = fitted();
    let mut wrong_version = outcome.file.clone();
    wrong_version.schema_version = 99;
    let err = ModelFile::from_json(&wrong_version.to_json().unwrap()).unwrap_err();
    assert_eq!(err.exit_code(), exit::PARSE);

    let mut renamed = outcome.file.clone();
    renamed.variables[1].categories[0].category = "XX".into();
    assert!(matches!(renamed.resolve(), Err(CliError::Invalid(_))));

    let mut short = outcome.file.clone();
    short.scores.pop();
    assert!(matches!(short.resolve(), Err(CliError::Invalid(_))));
}

#[test]
fn csv_errors_are_reported() {
    let ragged = "a,b\nx,y\nx\n";
    assert!(matches!(read_table(ragged.as_bytes(), None), Err(CliError::Csv(_))));

    let blank = "a,b\nx,y\nx, \n";
    let table = read_table(blank.as_bytes(), None).unwrap();
    let err = code_table(&table, None).unwrap_err();
    assert!(matches!(err, CliError::Data(nlbiplot::DataError::MissingCell { row: 2, .. })), "{err}");

    assert!(matches!(read_table("a,b\nx,y\n".as_bytes(), Some("id")), Err(CliError::Invalid(_))));
    assert!(matches!(read_table("id\n1\n".as_bytes(), Some("id")), Err(CliError::Invalid(_))));

    let single_level = "a,b\nx,y\nx,z\n";
    let table = read_table(single_level.as_bytes(), None).unwrap();
    assert!(matches!(code_table(&table, None), Err(CliError::Data(nlbiplot::DataError::TooFewLevels { .. }))));
}

#[test]
fn fields_are_trimmed() {
    let table = read_table(" id , a \n r1 , x \n r2 ,y\n".as_bytes(), Some("id")).unwrap();
    assert_eq!(table.var_names, ["a"]);
    assert_eq!(table.row_ids, Some(vec!["r1".to_string(), "r2".to_string()]));
    assert_eq!(table.rows, [["x"], ["y"]]);
}

#[test]
fn training_predictions_match_the_shipped_fit() {
    let (_, loaded) = fitted();
    let vars = commands::select_variables(&loaded, None).unwrap();
    let table = commands::predict(&loaded, &loaded.dataset, &vars).unwrap();
    assert_eq!(table.errors.len(), 4);
    assert_eq!(table.total_errors(), table.errors.iter().sum::<usize>());
    let csv = table.to_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "id,moisture_true,moisture_predicted,management_true,management_predicted,use_true,use_predicted,manure_true,manure_predicted"
    );
    assert_eq!(csv.lines().count(), 1 + 20 + 1);
    assert!(table.render().contains(&format!("total errors: {}", table.total_errors())));
}

#[test]
fn new_rows_are_scored_on_the_training_scale() {
    let (_, loaded) = fitted();
    let text = std::fs::read_to_string(terschelling_path()).unwrap();
    // Same rows, columns shuffled: scored exactly like the training table.
    let mut shuffled = String::from("manure,farm,use,moisture,management\n");
    for line in text.lines().skip(1) {
        let c: Vec<&str> = line.split(',').collect();
        shuffled.push_str(&format!("{},{},{},{},{}\n", c[4], c[0], c[3], c[1], c[2]));
    }
    let table = read_table(shuffled.as_bytes(), Some("farm")).unwrap();
    let data = commands::align_table(&loaded, table).unwrap();
    assert_eq!(data.codes(), loaded.dataset.codes());
    let all = commands::select_variables(&loaded, None).unwrap();
    let a = commands::predict(&loaded, &data, &all).unwrap();
    let b = commands::predict(&loaded, &loaded.dataset, &all).unwrap();
    assert_eq!(a, b);

    // A subset of rows goes through EAP scoring and reproduces the stored scores.
    let first_five: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
    let table = read_table(first_five.as_bytes(), Some("farm")).unwrap();
    let subset = commands::align_table(&loaded, table).unwrap();
    let scores = commands::score_rows(&loaded, &subset).unwrap();
    for i in 0..5 {
        for (x, y) in scores.row(i).iter().zip(loaded.model.scores.row(i)) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn schema_mismatches_are_rejected() {
    let (_, loaded) = fitted();
    let missing = read_table("farm,moisture,management,use\n1,M1,SF,U2\n".as_bytes(), Some("farm")).unwrap();
    assert!(matches!(commands::align_table(&loaded, missing), Err(CliError::Invalid(_))));
    let extra =
        read_table("farm,moisture,management,use,manure,x\n1,M1,SF,U2,C4,q\n".as_bytes(), Some("farm")).unwrap();
    assert!(matches!(commands::align_table(&loaded, extra), Err(CliError::Invalid(_))));
    let unknown = read_table("farm,moisture,management,use,manure\n1,M9,SF,U2,C4\n".as_bytes(), Some("farm")).unwrap();
    let err = commands::align_table(&loaded, unknown).unwrap_err();
    assert!(matches!(err, CliError::Data(nlbiplot::DataError::UnknownLevel { .. })));
    assert_eq!(err.exit_code(), exit::PARSE);
    assert!(commands::select_variables(&loaded, Some(&["soil".to_string()])).is_err());
}

#[test]
fn empty_variable_selection_gives_an_empty_table() {
    let (_, loaded) = fitted();
    let vars = commands::select_variables(&loaded, Some(&[])).unwrap();
    assert!(vars.is_empty());
    let table = commands::predict(&loaded, &loaded.dataset, &vars).unwrap();
    assert_eq!(table.total_errors(), 0);
    assert!(table.var_names.is_empty());
}

#[test]
fn perfectly_structured_data_is_predicted_without_errors() {
    // Two well separated groups answering every variable identically.
    let mut csv = String::from("a,b,c\n");
    for i in 0..30 {
        let row = match i % 3 {
            0 => "p,q,r\n",
            1 => "s,t,u\n",
            _ => "v,w,x\n",
        };
        csv.push_str(row);
    }
    let ds = code_table(&read_table(csv.as_bytes(), None).unwrap(), None).unwrap();
    let outcome = commands::fit(&ds, &EmConfig::default()).unwrap();
    let loaded = outcome.file.resolve().unwrap();
    let all = commands::select_variables(&loaded, None).unwrap();
    assert_eq!(commands::predict(&loaded, &loaded.dataset, &all).unwrap().total_errors(), 0);
}

#[test]
fn one_dimensional_models_refuse_geometry() {
    let cfg = EmConfig { dims: 1, ..EmConfig::default() };
    let outcome = commands::fit(&terschelling(), &cfg).unwrap();
    let loaded = outcome.file.resolve().unwrap();
    let err = commands::tessellations(&loaded, &[0], &GeometryOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), exit::PARSE);
    assert!(err.to_string().contains("at least two latent dimensions"));
}

#[test]
fn bad_planes_are_rejected() {
    let (_, loaded) = fitted();
    for plane in [(0, 0), (0, 2)] {
        let opts = GeometryOptions { plane, ..GeometryOptions::default() };
        assert_eq!(commands::tessellations(&loaded, &[0], &opts).unwrap_err().exit_code(), exit::PARSE);
    }
    let opts = GeometryOptions { bbox_inflate: 0.0, ..GeometryOptions::default() };
    assert!(commands::tessellations(&loaded, &[0], &opts).is_err());
}

#[test]
fn separable_data_without_penalty_advises_a_ridge() {
    let mut csv = String::from("a,b\n");
    for _ in 0..10 {
        csv.push_str("x,u\ny,v\n");
    }
    let ds = code_table(&read_table(csv.as_bytes(), None).unwrap(), None).unwrap();
    let cfg = EmConfig { ridge: nlbiplot::RidgeConfig::with_lambda(0.0), dims: 1, ..EmConfig::default() };
    let err = commands::fit(&ds, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), exit::NON_CONVERGENCE);
    assert!(err.to_string().contains("ridge penalty"), "{err}");
}

#[test]
fn tessellation_and_points_files_round_trip() {
    let (_, loaded) = fitted();
    let vars = commands::select_variables(&loaded, None).unwrap();
    let tess = commands::tessellations(&loaded, &vars, &GeometryOptions::default()).unwrap();
    let json = tess.to_json().unwrap();
    let back = TessellationFile::from_json(&json).unwrap();
    assert_eq!(back.to_json().unwrap(), json);
    assert_eq!(back.variables.len(), 4);
    assert_eq!(back.variables[0].hidden, ["M4"]);

    for alg in Algorithm::ALL {
        let points = commands::invert(&back, alg);
        let json = points.to_json().unwrap();
        assert_eq!(PointsFile::from_json(&json).unwrap(), points);
        for (v, named) in points.variables.iter().zip(&back.variables) {
            assert_eq!(v.points.len(), named.categories.len() - named.hidden.len());
            assert!(v.points.iter().all(|p| !named.hidden.contains(&p.category)));
            let score = v.fit_score.unwrap();
            assert!((0.0..=1.0).contains(&score));
        }
    }
}

#[test]
fn plots_cover_every_variable() {
    let (_, loaded) = fitted();
    let figures = commands::plots(&loaded, &GeometryOptions::default(), Algorithm::Combined).unwrap();
    let names: Vec<&str> = figures.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "regions_moisture.svg",
            "regions_management.svg",
            "regions_use.svg",
            "regions_manure.svg",
            "superimposed.svg",
            "biplot.svg"
        ]
    );
    for (_, svg) in &figures {
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.ends_with("</svg>\n"));
    }
    let moisture = &figures[0].1;
    assert!(moisture.contains(">Hidden</text>"));
    assert!(moisture.contains(">M4</text>"));
    assert!(figures[5].1.contains(">moisture: M4</text>"));
}

mod properties {
    use nlbiplot_cli::input::{code_table, read_table};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_labels_are_coded_by_first_appearance(
            rows in proptest::collection::vec(proptest::collection::vec("[a-d]{1,2}", 3), 2..25),
        ) {
            let mut csv = String::from("id,x,y,z\n");
            for (i, r) in rows.iter().enumerate() {
                csv.push_str(&format!("r{i},{}\n", r.join(",")));
            }
            let table = read_table(csv.as_bytes(), Some("id")).unwrap();
            prop_assert_eq!(&table.rows, &rows);
            let distinct = |j: usize| {
                let mut seen: Vec<&String> = Vec::new();
                for r in &rows {
                    if !seen.contains(&&r[j]) {
                        seen.push(&r[j]);
                    }
                }
                seen.len()
            };
            match code_table(&table, None) {
                Ok(ds) => {
                    for (i, r) in rows.iter().enumerate() {
                        for j in 0..3 {
                            prop_assert_eq!(&ds.categories()[j][ds.code(i, j)], &r[j]);
                        }
                    }
                    for j in 0..3 {
                        prop_assert_eq!(ds.categories()[j].len(), distinct(j));
                    }
                }
                Err(_) => prop_assert!((0..3).any(|j| distinct(j) < 2)),
            }
        }
    }
}
