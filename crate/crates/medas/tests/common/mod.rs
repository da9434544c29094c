#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use medas::Config;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// One `[[agents]]` stub entry.
pub fn stub(agent_id: &str, seed: u64, accuracy: f64, pool: &[&str], extra: &str) -> String {
    let pool: Vec<String> = pool.iter().map(|l| format!("{l:?}")).collect();
    format!(
        "[[agents]]\nagent_id = \"{agent_id}\"\nkind = \"stub\"\nseed = {seed}\ntarget_accuracy = {accuracy}\nlabel_pool = [{}]\n{extra}\n",
        pool.join(", ")
    )
}

pub fn config(text: &str) -> Arc<Config> {
    Arc::new(Config::from_toml(text, Path::new(".")).expect("test config is valid"))
}

/// Three agents always answer "pulmonary embolism", two "pneumonia".
pub fn split_config(header: &str) -> String {
    let mut text = String::from(header);
    for (i, id) in ["alpha", "bravo", "charlie"].iter().enumerate() {
        text += &stub(id, i as u64, 0.5, &["pulmonary embolism"], "");
    }
    for (i, id) in ["delta", "echo"].iter().enumerate() {
        text += &stub(id, 10 + i as u64, 0.5, &["pneumonia"], "");
    }
    text
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}
