use std::collections::HashMap;

/// Row-sparse gradient accumulator for one parameter table.
///
/// Rows keep their first-touch order, so merging chunks in a fixed order
/// gives bit-identical sums regardless of how the chunks were scheduled.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    width: usize,
    index: HashMap<usize, usize>,
    rows: Vec<usize>,
    data: Vec<f64>,
}

impl SparseRows {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            index: HashMap::new(),
            rows: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Zero-initialized on first touch.
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        let slot = match self.index.get(&row) {
            Some(&slot) => slot,
            None => {
                let slot = self.rows.len();
                self.rows.push(row);
                self.index.insert(row, slot);
                self.data.resize(self.data.len() + self.width, 0.0);
                slot
            }
        };
        &mut self.data[slot * self.width..(slot + 1) * self.width]
    }

    pub fn get(&self, row: usize) -> Option<&[f64]> {
        self.index
            .get(&row)
            .map(|&slot| &self.data[slot * self.width..(slot + 1) * self.width])
    }

    /// Touched rows with their gradients, in first-touch order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows
            .iter()
            .copied()
            .zip(self.data.chunks_exact(self.width.max(1)))
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn add_assign(&mut self, other: &SparseRows) {
        debug_assert_eq!(self.width, other.width);
        for (row, g) in other.iter() {
            for (a, b) in self.row_mut(row).iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    /// Dense copy, `num_rows × width`, untouched rows zero.
    pub fn to_dense(&self, num_rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_rows * self.width];
        for (row, g) in self.iter() {
            out[row * self.width..(row + 1) * self.width].copy_from_slice(g);
        }
        out
    }
}

/// Gradients for both parameter tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub entities: SparseRows,
    pub relations: SparseRows,
}

impl Gradients {
    pub fn new(entity_width: usize, relation_width: usize) -> Self {
        Self {
            entities: SparseRows::new(entity_width),
            relations: SparseRows::new(relation_width),
        }
    }

    pub fn for_model(model: &crate::Model) -> Self {
        let shape = model.shape();
        Self::new(shape.dim(), shape.relation_len())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.entities.add_assign(&other.entities);
        self.relations.add_assign(&other.relations);
    }

    pub fn scale(&mut self, factor: f64) {
        self.entities.scale(factor);
        self.relations.scale(factor);
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }
}
