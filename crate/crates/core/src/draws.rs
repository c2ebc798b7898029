//! Column-major storage of post-burn-in MCMC draws.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DrawsStore {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    /// Latent-state draws, one row per stored iteration (`s_0..s_T`).
    states: Vec<Vec<f64>>,
    pub state_thin: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    /// Wall-clock seconds of the whole run, burn-in included.
    pub runtime_secs: f64,
    /// Sampler statistics such as acceptance rates.
    pub info: BTreeMap<String, f64>,
}

impl DrawsStore {
    pub fn new(names: Vec<String>, n_iter: usize, burn_in: usize, state_thin: usize) -> Self {
        let columns = vec![Vec::with_capacity(n_iter.saturating_sub(burn_in)); names.len()];
        DrawsStore {
            names,
            columns,
            states: Vec::new(),
            state_thin: state_thin.max(1),
            n_iter,
            burn_in,
            runtime_secs: 0.0,
            info: BTreeMap::new(),
        }
    }

    /// Assemble a store from finished columns.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return domain("names and columns differ in length");
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return domain("columns differ in length");
        }
        Ok(DrawsStore {
            names,
            columns,
            states: Vec::new(),
            state_thin: 1,
            n_iter: n,
            burn_in: 0,
            runtime_secs: 0.0,
            info: BTreeMap::new(),
        })
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns.len());
        for (c, &v) in self.columns.iter_mut().zip(row) {
            c.push(v);
        }
    }

    pub fn push_states(&mut self, s: &[f64]) {
        self.states.push(s.to_vec());
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_draws(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.columns.iter().map(Vec::as_slice))
    }

    pub fn has_states(&self) -> bool {
        !self.states.is_empty()
    }

    pub fn n_state_draws(&self) -> usize {
        self.states.len()
    }

    /// Number of latent states per draw (`T + 1`).
    pub fn state_len(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn state_rows(&self) -> &[Vec<f64>] {
        &self.states
    }

    /// Draws of `s_t` across stored iterations.
    pub fn state_column(&self, t: usize) -> Vec<f64> {
        self.states.iter().map(|row| row[t]).collect()
    }

    /// Header for CSV output: parameters, then `s_0..s_T` when states are
    /// stored.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = self.names.clone();
        if self.has_states() {
            h.extend((0..self.state_len()).map(|t| format!("s_{t}")));
        }
        h
    }

    /// Rows of the CSV table. With thinned states only iterations that
    /// carry a state row are emitted.
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        let n = self.n_draws();
        if !self.has_states() {
            return (0..n).map(|i| self.columns.iter().map(|c| c[i]).collect()).collect();
        }
        self.states
            .iter()
            .enumerate()
            .map(|(k, srow)| {
                let i = (k + 1) * self.state_thin - 1;
                let mut row: Vec<f64> = self.columns.iter().map(|c| c[i.min(n - 1)]).collect();
                row.extend_from_slice(srow);
                row
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_columns() {
        let mut d = DrawsStore::new(vec!["mu".into(), "phi".into()], 5, 2, 1);
        d.push_row(&[1.0, 0.5]);
        d.push_row(&[2.0, 0.6]);
        d.push_states(&[0.1, 0.2]);
        d.push_states(&[0.3, 0.4]);
        assert_eq!(d.column("phi").unwrap(), &[0.5, 0.6]);
        assert_eq!(d.state_column(1), vec![0.2, 0.4]);
        assert_eq!(d.csv_header(), vec!["mu", "phi", "s_0", "s_1"]);
        assert_eq!(d.csv_rows()[1], vec![2.0, 0.6, 0.3, 0.4]);
        assert!(d.column("sigma").is_none());
    }
}
