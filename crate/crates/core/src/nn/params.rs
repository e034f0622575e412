use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamShape {
    Vector(usize),
    Matrix { rows: usize, cols: usize },
}

impl ParamShape {
    pub fn len(&self) -> usize {
        match *self {
            ParamShape::Vector(n) => n,
            ParamShape::Matrix { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Read-only view of one named parameter tensor.
#[derive(Clone, Debug)]
pub struct ParamView<'a> {
    pub name: String,
    pub shape: ParamShape,
    pub values: &'a [f64],
}

/// Anything that owns trainable parameters in a fixed, stable order.
///
/// `params` and `params_mut` must enumerate the same tensors in the same
/// order; optimizers and gradient sets rely on that alignment.
pub trait Parameterized {
    fn params(&self) -> Vec<ParamView<'_>>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.values.len()).sum()
    }
}

pub(crate) fn with_prefix<'a>(prefix: &str, views: Vec<ParamView<'a>>) -> Vec<ParamView<'a>> {
    views
        .into_iter()
        .map(|mut v| {
            v.name = format!("{prefix}.{}", v.name);
            v
        })
        .collect()
}

/// Gradients aligned slot-for-slot with a [`Parameterized`] value.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub slots: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like<P: Parameterized + ?Sized>(model: &P) -> Self {
        Self {
            slots: model.params().iter().map(|p| vec![0.0; p.values.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) -> Result<()> {
        if self.slots.len() != other.slots.len() {
            return Err(Error::shape(
                "gradient add",
                (self.slots.len(), 0),
                (other.slots.len(), 0),
            ));
        }
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            if a.len() != b.len() {
                return Err(Error::shape("gradient add", (a.len(), 1), (b.len(), 1)));
            }
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slots.iter().flatten().copied().collect()
    }
}

pub fn flatten_params<P: Parameterized + ?Sized>(model: &P) -> Vec<f64> {
    model.params().iter().flat_map(|p| p.values.iter().copied()).collect()
}

/// Overwrites every parameter from a flat vector in `params` order.
pub fn load_params<P: Parameterized + ?Sized>(model: &mut P, flat: &[f64]) -> Result<()> {
    let total = model.param_count();
    if flat.len() != total {
        return Err(Error::shape("load_params", (total, 1), (flat.len(), 1)));
    }
    let mut offset = 0;
    for slot in model.params_mut() {
        let n = slot.len();
        slot.copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    }
    Ok(())
}
