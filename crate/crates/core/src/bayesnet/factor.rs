//! Dense factors over discrete variables.

/// Non-negative table over the joint states of `scope`. Variables are node
/// indices kept in ascending order; the last variable varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub scope: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(scope.len(), cards.len());
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(values.len(), cards.iter().product::<usize>());
        Self {
            scope,
            cards,
            values,
        }
    }

    /// Factor with an empty scope.
    pub fn unit() -> Self {
        Self::new(Vec::new(), Vec::new(), vec![1.0])
    }

    pub fn contains(&self, var: usize) -> bool {
        self.scope.binary_search(&var).is_ok()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.cards.len()];
        for i in (0..self.cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope = Vec::with_capacity(self.scope.len() + other.scope.len());
        let mut cards = Vec::with_capacity(scope.capacity());
        let (mut i, mut j) = (0, 0);
        while i < self.scope.len() || j < other.scope.len() {
            let take_self =
                j >= other.scope.len() || (i < self.scope.len() && self.scope[i] <= other.scope[j]);
            if take_self {
                if j < other.scope.len() && self.scope[i] == other.scope[j] {
                    debug_assert_eq!(self.cards[i], other.cards[j]);
                    j += 1;
                }
                scope.push(self.scope[i]);
                cards.push(self.cards[i]);
                i += 1;
            } else {
                scope.push(other.scope[j]);
                cards.push(other.cards[j]);
                j += 1;
            }
        }

        let project = |f: &Factor| -> Vec<usize> {
            let strides = f.strides();
            scope
                .iter()
                .map(|v| f.scope.binary_search(v).map_or(0, |k| strides[k]))
                .collect()
        };
        let sa = project(self);
        let sb = project(other);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut index = vec![0usize; cards.len()];
        let (mut a, mut b) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[a] * other.values[b]);
            for k in (0..cards.len()).rev() {
                index[k] += 1;
                a += sa[k];
                b += sb[k];
                if index[k] < cards[k] {
                    break;
                }
                a -= sa[k] * cards[k];
                b -= sb[k] * cards[k];
                index[k] = 0;
            }
        }
        Factor::new(scope, cards, values)
    }

    /// Sums `var` out of the factor. Returns a clone when `var` is absent.
    pub fn sum_out(&self, var: usize) -> Factor {
        let Ok(k) = self.scope.binary_search(&var) else {
            return self.clone();
        };
        let card = self.cards[k];
        let inner: usize = self.cards[k + 1..].iter().product();
        let outer: usize = self.cards[..k].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let src = &self.values[(o * card + s) * inner..(o * card + s + 1) * inner];
                let dst = &mut values[o * inner..(o + 1) * inner];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += v;
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(k);
        cards.remove(k);
        Factor::new(scope, cards, values)
    }
}
