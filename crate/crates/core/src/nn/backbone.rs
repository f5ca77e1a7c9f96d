use rayon::prelude::*;

use super::conv::{spatial_mean, ConvNet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Planar};

/// Embeddings and the spatial feature stacks they average.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded<T> {
    pub embeddings: Matrix<T>,
    pub spatial: Vec<Planar<T>>,
}

/// An image encoder whose embedding is the global spatial average of its
/// final feature stack.
pub trait Backbone<T: Scalar>: Sync {
    fn architecture_id(&self) -> &str;
    fn embedding_dim(&self) -> usize;
    /// Spatial grid at the nominal input size.
    fn grid(&self) -> (usize, usize);
    fn parameters(&self) -> &[T];
    fn parameters_mut(&mut self) -> &mut [T];
    /// `D×h×w` features of one normalized image.
    fn spatial_features(&self, image: &Planar<T>) -> Result<Planar<T>>;

    /// Only the embeddings, without retaining the spatial stacks.
    fn embed_only(&self, batch: &[Planar<T>]) -> Result<Matrix<T>> {
        let rows: Vec<Vec<T>> =
            batch.par_iter().map(|x| self.spatial_features(x).map(|f| spatial_mean(&f))).collect::<Result<_>>()?;
        to_matrix(rows, self.embedding_dim())
    }

    fn embed(&self, batch: &[Planar<T>]) -> Result<Embedded<T>> {
        let spatial: Vec<Planar<T>> = batch.par_iter().map(|x| self.spatial_features(x)).collect::<Result<_>>()?;
        let embeddings = to_matrix(spatial.iter().map(spatial_mean).collect(), self.embedding_dim())?;
        Ok(Embedded { embeddings, spatial })
    }
}

fn to_matrix<T: Scalar>(rows: Vec<Vec<T>>, dim: usize) -> Result<Matrix<T>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Contract(format!("embedding of width {} where {dim} was declared", bad.len())));
    }
    let n = rows.len();
    Matrix::from_vec(n, dim, rows.concat())
}

impl<T: Scalar> Backbone<T> for ConvNet<T> {
    fn architecture_id(&self) -> &str {
        &self.architecture().id
    }

    fn embedding_dim(&self) -> usize {
        ConvNet::embedding_dim(self)
    }

    fn grid(&self) -> (usize, usize) {
        self.architecture().grid()
    }

    fn parameters(&self) -> &[T] {
        &self.params().data
    }

    fn parameters_mut(&mut self) -> &mut [T] {
        &mut self.params_mut().data
    }

    fn spatial_features(&self, image: &Planar<T>) -> Result<Planar<T>> {
        self.features(image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn embeddings_are_spatial_means() {
        let net = ConvNet::<f64>::from_id("small-cnn", 4).unwrap();
        let mut rng = stream(0, "img", &[]);
        let batch: Vec<Planar<f64>> = (0..3)
            .map(|_| Planar::from_vec(3, 32, 32, (0..3 * 32 * 32).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap())
            .collect();
        let out = net.embed(&batch).unwrap();
        assert_eq!(out.embeddings.cols(), 128);
        for (i, s) in out.spatial.iter().enumerate() {
            assert_eq!((s.height, s.width), (4, 4));
            for d in 0..128 {
                let mean = s.plane(d).iter().sum::<f64>() / 16.0;
                assert!((mean - out.embeddings.get(i, d)).abs() < 1e-12);
            }
        }
        assert_eq!(net.embed_only(&batch).unwrap(), out.embeddings);
    }

    #[test]
    fn empty_batch_is_valid() {
        let net = ConvNet::<f32>::from_id("small-cnn", 0).unwrap();
        let out = net.embed(&[]).unwrap();
        assert_eq!((out.embeddings.rows(), out.embeddings.cols()), (0, 128));
    }
}
