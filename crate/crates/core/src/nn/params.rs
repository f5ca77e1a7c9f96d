use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat parameter vector with named, shaped segments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub data: Vec<T>,
    pub layout: Vec<ParamSpec>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn from_layout(shapes: &[(&str, Vec<usize>)]) -> Self {
        let mut layout = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for (name, shape) in shapes {
            let spec = ParamSpec { name: (*name).to_owned(), offset, shape: shape.clone() };
            offset += spec.len();
            layout.push(spec);
        }
        Self { data: vec![T::zero(); offset], layout }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn spec(&self, name: &str) -> Option<&ParamSpec> {
        self.layout.iter().find(|s| s.name == name)
    }

    pub fn segment(&self, index: usize) -> &[T] {
        &self.data[self.layout[index].range()]
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.layout == other.layout
    }

    /// Stores each segment as `<prefix>/<name>`.
    pub fn store(&self, prefix: &str, out: &mut Container) -> Result<()> {
        for spec in &self.layout {
            out.add_blob(&format!("{prefix}/{}", spec.name), &spec.shape, &self.data[spec.range()])?;
        }
        Ok(())
    }

    /// Fills every segment from `<prefix>/<name>` blobs, checking shapes.
    pub fn load(&mut self, prefix: &str, from: &Container) -> Result<()> {
        for spec in &self.layout {
            let name = format!("{prefix}/{}", spec.name);
            let (shape, values) = from.blob::<T>(&name)?;
            if shape != spec.shape {
                return Err(Error::Shape(format!("blob `{name}` has shape {shape:?}, expected {:?}", spec.shape)));
            }
            self.data[spec.range()].copy_from_slice(&values);
        }
        Ok(())
    }
}
