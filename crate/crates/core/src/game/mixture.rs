use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::is_distribution;
use crate::tol;

use super::DENSE_PROFILE_CAP;

/// Largest player subset [`MixtureStrategy::marginalize`] will materialize.
pub const MARGINAL_PLAYER_CAP: usize = 12;

/// One product distribution inside a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    #[serde(rename = "w")]
    weight: f64,
    marginals: Vec<Vec<f64>>,
}

impl Component {
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn marginal(&self, player: usize) -> &[f64] {
        &self.marginals[player]
    }
}

/// Correlated strategy represented as a finite mixture of product
/// distributions. Components are validated on construction: weights form a
/// distribution and every marginal lies in the simplex (tolerance `1e-12`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureWire", into = "MixtureWire")]
pub struct MixtureStrategy {
    n_players: usize,
    n_actions: usize,
    components: Vec<Component>,
}

#[derive(Serialize, Deserialize)]
struct MixtureWire {
    components: Vec<Component>,
}

impl TryFrom<MixtureWire> for MixtureStrategy {
    type Error = Error;
    fn try_from(w: MixtureWire) -> Result<Self> {
        MixtureStrategy::from_components(w.components)
    }
}

impl From<MixtureStrategy> for MixtureWire {
    fn from(z: MixtureStrategy) -> Self {
        MixtureWire { components: z.components }
    }
}

impl MixtureStrategy {
    pub fn new(components: Vec<(f64, Vec<Vec<f64>>)>) -> Result<Self> {
        MixtureStrategy::from_components(
            components.into_iter().map(|(weight, marginals)| Component { weight, marginals }).collect(),
        )
    }

    fn from_components(components: Vec<Component>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::InvalidStrategy("mixture has no components".into()))?;
        let n_players = first.marginals.len();
        let n_actions = first.marginals.first().map_or(0, Vec::len);
        if n_players == 0 || n_actions == 0 {
            return Err(Error::InvalidStrategy("empty marginals".into()));
        }
        let mut total = 0.0;
        for (c, comp) in components.iter().enumerate() {
            if !(comp.weight.is_finite() && comp.weight >= 0.0) {
                return Err(Error::InvalidStrategy(format!("component {c} has weight {}", comp.weight)));
            }
            total += comp.weight;
            if comp.marginals.len() != n_players || comp.marginals.iter().any(|m| m.len() != n_actions) {
                return Err(Error::InvalidStrategy(format!("component {c} has inconsistent shape")));
            }
            if let Some(p) = comp.marginals.iter().position(|m| !is_distribution(m, tol::ALGEBRAIC)) {
                return Err(Error::InvalidStrategy(format!(
                    "component {c}, player {p}: marginal is not a distribution"
                )));
            }
        }
        if (total - 1.0).abs() > tol::ALGEBRAIC {
            return Err(Error::InvalidStrategy(format!("weights sum to {total}")));
        }
        Ok(MixtureStrategy { n_players, n_actions, components })
    }

    /// Single-component mixture.
    pub fn product(marginals: Vec<Vec<f64>>) -> Result<Self> {
        MixtureStrategy::new(vec![(1.0, marginals)])
    }

    pub fn point_mass(n_players: usize, n_actions: usize, profile: &[usize]) -> Result<Self> {
        if profile.len() != n_players || profile.iter().any(|&a| a >= n_actions) {
            return Err(Error::DimensionMismatch(format!("profile {profile:?}")));
        }
        let marginals = profile
            .iter()
            .map(|&a| {
                let mut e = vec![0.0; n_actions];
                e[a] = 1.0;
                e
            })
            .collect();
        MixtureStrategy::product(marginals)
    }

    /// Convex combination of mixtures (weights must sum to one).
    pub fn combine(parts: &[(f64, &MixtureStrategy)]) -> Result<Self> {
        let components = parts
            .iter()
            .flat_map(|(w, z)| {
                z.components.iter().map(move |c| Component { weight: w * c.weight, marginals: c.marginals.clone() })
            })
            .collect();
        MixtureStrategy::from_components(components)?.pruned()
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Drops components lighter than [`tol::PRUNE_WEIGHT`] and rescales the rest.
    pub fn pruned(mut self) -> Result<Self> {
        self.components.retain(|c| c.weight >= tol::PRUNE_WEIGHT);
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if self.components.is_empty() || total <= 0.0 {
            return Err(Error::InvalidStrategy("all components pruned".into()));
        }
        for c in &mut self.components {
            c.weight /= total;
        }
        Ok(self)
    }

    /// Replaces player `i`'s marginal in every component. The closure receives
    /// the old marginal and must return a distribution.
    pub(crate) fn map_marginal(&self, i: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| {
                let mut marginals = c.marginals.clone();
                marginals[i] = f(&c.marginals[i]);
                Component { weight: c.weight, marginals }
            })
            .collect();
        MixtureStrategy::from_components(components)?.pruned()
    }

    /// `z(a)` for a pure profile.
    pub fn probability(&self, profile: &[usize]) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * profile.iter().enumerate().map(|(p, &a)| c.marginals[p][a]).product::<f64>())
            .sum()
    }

    /// Marginal distribution of a single player.
    pub fn player_marginal(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions];
        for c in &self.components {
            for (o, x) in out.iter_mut().zip(&c.marginals[i]) {
                *o += c.weight * x;
            }
        }
        out
    }

    /// Joint marginal of the players in `subset` (in the given order).
    pub fn marginalize(&self, subset: &[usize]) -> Result<JointMarginal> {
        if subset.is_empty() {
            return Err(Error::InvalidParameter("empty player subset".into()));
        }
        if let Some(&p) = subset.iter().find(|&&p| p >= self.n_players) {
            return Err(Error::IndexOutOfRange(format!("player {p} of {}", self.n_players)));
        }
        for (k, p) in subset.iter().enumerate() {
            if subset[..k].contains(p) {
                return Err(Error::InvalidParameter(format!("player {p} repeated in subset")));
            }
        }
        let cells = self.n_actions.checked_pow(subset.len() as u32).filter(|&c| c <= DENSE_PROFILE_CAP);
        let cells = match cells {
            Some(c) if subset.len() <= MARGINAL_PLAYER_CAP => c,
            _ => {
                return Err(Error::CapExceeded(format!(
                    "marginal over {} players of {} actions",
                    subset.len(),
                    self.n_actions
                )))
            }
        };
        let mut probs = vec![0.0; cells];
        for c in &self.components {
            // Outer product of the subset marginals, first player most significant.
            let mut outer = vec![c.weight];
            for &p in subset {
                let x = &c.marginals[p];
                outer = outer.iter().flat_map(|&v| x.iter().map(move |&xa| v * xa)).collect();
            }
            for (o, v) in probs.iter_mut().zip(outer) {
                *o += v;
            }
        }
        Ok(JointMarginal { players: subset.to_vec(), n_actions: self.n_actions, probs })
    }
}

/// Distribution over the action tuples of a player subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointMarginal {
    pub players: Vec<usize>,
    pub n_actions: usize,
    pub probs: Vec<f64>,
}

impl JointMarginal {
    pub fn get(&self, actions: &[usize]) -> f64 {
        let idx = actions.iter().fold(0, |idx, &a| idx * self.n_actions + a);
        self.probs[idx]
    }
}

/// Independent play: one distribution per player, all over `ℓ` actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ProductStrategy {
    marginals: Vec<Vec<f64>>,
}

impl ProductStrategy {
    pub fn new(marginals: Vec<Vec<f64>>) -> Result<Self> {
        let l = marginals.first().map_or(0, Vec::len);
        if l == 0 || marginals.iter().any(|m| m.len() != l) {
            return Err(Error::InvalidStrategy("marginals must share a nonzero length".into()));
        }
        if let Some(p) = marginals.iter().position(|m| !is_distribution(m, tol::ALGEBRAIC)) {
            return Err(Error::InvalidStrategy(format!("player {p}: marginal is not a distribution")));
        }
        Ok(ProductStrategy { marginals })
    }

    pub fn uniform(n_players: usize, n_actions: usize) -> Self {
        ProductStrategy { marginals: vec![vec![1.0 / n_actions as f64; n_actions]; n_players] }
    }

    pub fn pure(n_actions: usize, profile: &[usize]) -> Result<Self> {
        let marginals = profile
            .iter()
            .map(|&a| {
                let mut e = vec![0.0; n_actions];
                *e.get_mut(a).ok_or_else(|| Error::DimensionMismatch(format!("action {a}")))? = 1.0;
                Ok(e)
            })
            .collect::<Result<_>>()?;
        ProductStrategy::new(marginals)
    }

    pub fn n_players(&self) -> usize {
        self.marginals.len()
    }

    pub fn n_actions(&self) -> usize {
        self.marginals[0].len()
    }

    pub fn marginal(&self, i: usize) -> &[f64] {
        &self.marginals[i]
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn into_marginals(self) -> Vec<Vec<f64>> {
        self.marginals
    }

    pub fn to_mixture(&self) -> MixtureStrategy {
        MixtureStrategy {
            n_players: self.n_players(),
            n_actions: self.n_actions(),
            components: vec![Component { weight: 1.0, marginals: self.marginals.clone() }],
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for ProductStrategy {
    type Error = Error;
    fn try_from(m: Vec<Vec<f64>>) -> Result<Self> {
        ProductStrategy::new(m)
    }
}

impl From<ProductStrategy> for Vec<Vec<f64>> {
    fn from(p: ProductStrategy) -> Self {
        p.marginals
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(MixtureStrategy::new(vec![(0.5, vec![vec![1.0, 0.0]])]).is_err());
        assert!(MixtureStrategy::new(vec![(1.0, vec![vec![0.6, 0.6]])]).is_err());
        assert!(MixtureStrategy::new(vec![(1.0, vec![vec![1.2, -0.2]])]).is_err());
        assert!(MixtureStrategy::new(vec![]).is_err());
        assert!(MixtureStrategy::new(vec![(0.5, vec![vec![1.0, 0.0]]), (0.5, vec![vec![1.0]])]).is_err());
        assert!(MixtureStrategy::new(vec![(0.25, vec![vec![1.0, 0.0]]), (0.75, vec![vec![0.5, 0.5]])]).is_ok());
    }

    #[test]
    fn single_component_marginal_is_component_marginal() {
        let z = MixtureStrategy::product(vec![vec![0.2, 0.8], vec![0.7, 0.3]]).unwrap();
        assert_eq!(z.marginalize(&[1]).unwrap().probs, vec![0.7, 0.3]);
        assert_eq!(z.player_marginal(0), vec![0.2, 0.8]);
    }

    #[test]
    fn full_marginal_of_point_mass_is_indicator() {
        let z = MixtureStrategy::point_mass(3, 2, &[1, 0, 1]).unwrap();
        let m = z.marginalize(&[0, 1, 2]).unwrap();
        let expected: Vec<f64> = (0..8).map(|i| if i == 5 { 1.0 } else { 0.0 }).collect();
        assert_eq!(m.probs, expected);
        assert_eq!(m.get(&[1, 0, 1]), 1.0);
    }

    #[test]
    fn marginalize_errors() {
        let z = MixtureStrategy::point_mass(3, 2, &[1, 0, 1]).unwrap();
        assert!(matches!(z.marginalize(&[]), Err(Error::InvalidParameter(_))));
        assert!(matches!(z.marginalize(&[3]), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(z.marginalize(&[1, 1]), Err(Error::InvalidParameter(_))));
        let big = MixtureStrategy::product(vec![vec![0.5, 0.5]; 13]).unwrap();
        assert!(matches!(big.marginalize(&(0..13).collect::<Vec<_>>()), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn pruning_drops_negligible_components() {
        let a = MixtureStrategy::point_mass(1, 2, &[0]).unwrap();
        let b = MixtureStrategy::point_mass(1, 2, &[1]).unwrap();
        let z = MixtureStrategy::combine(&[(1.0 - 1e-16, &a), (1e-16, &b)]).unwrap();
        assert_eq!(z.len(), 1);
        assert_eq!(z.components()[0].weight(), 1.0);
    }

    #[test]
    fn mixture_json_uses_short_field_names() {
        let z = MixtureStrategy::product(vec![vec![0.5, 0.5]]).unwrap();
        let text = serde_json::to_string(&z).unwrap();
        assert_eq!(text, r#"{"components":[{"w":1.0,"marginals":[[0.5,0.5]]}]}"#);
        let back: MixtureStrategy = serde_json::from_str(&text).unwrap();
        assert_eq!(back, z);
        assert!(serde_json::from_str::<MixtureStrategy>(r#"{"components":[{"w":0.5,"marginals":[[1.0]]}]}"#).is_err());
    }
}
