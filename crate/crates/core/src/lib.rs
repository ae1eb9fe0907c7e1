//! Expected joint sample frequency spectra for populations related by a
//! tree-shaped demographic history.
//!
//! The crate is split along the computation:
//!
//! * [`size_history`] describes the coalescence rate `α(t)` of one population
//!   as piecewise constant/exponential segments.
//! * [`ancestral`] tabulates the distribution of the number of ancestral
//!   lineages after a finite time.
//! * [`truncated_sfs`] computes the SFS of mutations arising within a finite
//!   time window, for every sample size up to `n`, in `O(n²)`.
//! * [`demography`] holds the population tree and the entry enumeration.
//! * [`moran`] peels the population tree with a forward-in-time Moran model to
//!   evaluate individual joint SFS entries.
//!
//! All branch lengths are in coalescent time units with `θ/2 = 1`.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled; the FFT convolution path is only available with `std`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ancestral;
pub mod demography;
mod error;
pub mod math;
pub mod moran;
pub mod size_history;
pub mod truncated_sfs;

pub use ancestral::AncestralProbTable;
pub use demography::{DemographyTree, EntryMode, NodeSpec, SfsEntry, VertexId};
pub use error::{Error, Result};
pub use moran::{Engine, EngineOptions, LikelihoodVector};
pub use size_history::{Segment, SegmentKind, SizeHistory};
pub use truncated_sfs::{TruncatedSfsTable, WeightTable};
