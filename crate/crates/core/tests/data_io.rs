use std::path::PathBuf;

use fairtrs::data::{load_csv, read_csv, DataError, DatasetSchema};
use fairtrs::experiment::{load_splits, CsvSource, DatasetSource};

fn schema_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(name)
}

const ADULT: &str = "\
age,workclass,education-num,capital-gain,capital-loss,hours-per-week,sex,income
39, State-gov,13,2174,0,40, Male, <=50K
50, Self-emp,13,0,0,13, Female, >50K
38, Private,9,0,0,40, Male, <=50K
53, ?,7,0,0,40, Male, >50K
28, Private,13,0,0,40, Female, <=50K.
37, Private,?,0,0,40, Female, <=50K
";

#[test]
fn adult_schema_maps_salary_and_sex() {
    let schema = DatasetSchema::from_path(schema_path("adult.schema.json")).unwrap();
    let loaded = read_csv(ADULT.as_bytes(), &schema).unwrap();
    // the missing workclass is not a selected column; the missing education-num is
    assert_eq!(loaded.dropped, 1);
    let d = &loaded.dataset;
    assert_eq!(d.len(), 5);
    assert_eq!(d.n_features(), 5);
    assert_eq!(d.labels(), &[1, 0, 1, 0, 1]);
    assert_eq!(d.sensitive(), &[1, 0, 1, 1, 0]);
    assert_eq!(d.row(0)[0], (39.0 - 28.0) / (53.0 - 28.0));
    assert_eq!(d.row(0)[2], 1.0);
    // constant capital-loss column
    assert!(d.features().iter().all(|r| r[3] == 0.5));
    assert!(d
        .features()
        .iter()
        .flatten()
        .all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn adult_label_can_be_inverted() {
    let text = std::fs::read_to_string(schema_path("adult.schema.json"))
        .unwrap()
        .replace("\"invert\": false", "\"invert\": true");
    let schema = DatasetSchema::from_json(&text).unwrap();
    let loaded = read_csv(ADULT.as_bytes(), &schema).unwrap();
    assert_eq!(loaded.dataset.labels(), &[0, 1, 0, 1, 0]);
}

#[test]
fn lsat_schema_loads_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lsat.csv");
    std::fs::write(
        &csv,
        "lsat,ugpa,race,pass_bar\n44,3.5,White,1.0\n29,2.8,Black,0.0\n36,3.1,Asian,1\n,3.0,White,1\n",
    )
    .unwrap();
    let schema = DatasetSchema::from_path(schema_path("lsat.schema.json")).unwrap();
    let loaded = load_csv(&csv, &schema).unwrap();
    assert_eq!(loaded.dropped, 1);
    assert_eq!(loaded.dataset.labels(), &[1, 0, 1]);
    assert_eq!(loaded.dataset.sensitive(), &[1, 0, 0]);
    assert_eq!(loaded.dataset.feature_names(), &["lsat", "ugpa"]);

    let mut strict = schema.clone();
    strict.strict = true;
    assert!(matches!(
        load_csv(&csv, &strict),
        Err(DataError::BadRow { row: 5, .. })
    ));
}

#[test]
fn missing_columns_and_empty_files_are_reported() {
    let schema = DatasetSchema::from_path(schema_path("lsat.schema.json")).unwrap();
    let err = read_csv("lsat,gpa,race,pass_bar\n1,2,White,1\n".as_bytes(), &schema).unwrap_err();
    assert!(matches!(err, DataError::MissingColumn(c) if c == "ugpa"));
    let err = read_csv("lsat,ugpa,race,pass_bar\n".as_bytes(), &schema).unwrap_err();
    assert!(matches!(err, DataError::NoRows { dropped: 0 }));
    assert!(DatasetSchema::from_json(r#"{"features": []}"#).is_err());
}

#[test]
fn headerless_files_use_column_indices() {
    let schema = DatasetSchema::from_json(
        r#"{
          "features": ["0", "1"],
          "label": {"column": "3", "positive": ["yes"]},
          "sensitive": {"column": "2", "positive": ["a"]},
          "has_header": false,
          "delimiter": ";"
        }"#,
    )
    .unwrap();
    let loaded = read_csv("1;5;a;yes\n3;1;b;no\n2;3;a;no\n".as_bytes(), &schema).unwrap();
    let d = loaded.dataset;
    assert_eq!(d.labels(), &[1, 0, 0]);
    assert_eq!(d.sensitive(), &[1, 0, 1]);
    assert_eq!(d.row(2), &[0.5, 0.5]);
}

#[test]
fn csv_source_splits_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lsat.csv");
    let mut text = String::from("lsat,ugpa,race,pass_bar\n");
    for i in 0..50 {
        let race = if i % 3 == 0 { "White" } else { "Other" };
        text.push_str(&format!(
            "{},{},{race},{}\n",
            20 + i,
            2.0 + 0.03 * i as f64,
            i % 2
        ));
    }
    std::fs::write(&csv, text).unwrap();
    let source = DatasetSource::Csv(CsvSource {
        path: csv,
        schema: schema_path("lsat.schema.json"),
        test_fraction: 0.2,
        split_seed: 7,
    });
    let a = load_splits(&source).unwrap();
    let b = load_splits(&source).unwrap();
    assert_eq!(a.train.len(), 40);
    assert_eq!(a.test.len(), 10);
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
}
