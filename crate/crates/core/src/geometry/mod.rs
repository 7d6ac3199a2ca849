//! Cartesian meshes and their classification against a level-set interface.

mod cut;
mod levelset;
mod mesh;
mod point;

use thiserror::Error;

pub use cut::{
    classify_edges, classify_elements, cut_by_chord, cut_polygon, discrete_subdomain_areas,
    Chord, CutGeometry, CutStatus, EdgeLabel, ElementCut, PolygonCut, RectCutType, Side,
};
pub use levelset::{InterfaceGeometry, LevelSet};
pub use mesh::{build_mesh, CartesianMesh, CellKind, DomainSpec, Edge, Element};
pub use point::{polygon_area, polygon_centroid, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("level set changes sign more than once between {p0:?} and {p1:?}; refine the mesh")]
    MultipleCrossings { p0: Point, p1: Point },
    #[error("inconsistent interface cut: {0}")]
    InconsistentCut(String),
    #[error("unknown level set `{0}` (expected circle(cx,cy,r) or line(a,b,c))")]
    UnknownLevelSet(String),
}

/// Mesh together with its interface classification.
#[derive(Debug, Clone)]
pub struct ClassifiedMesh {
    pub mesh: CartesianMesh,
    pub iface: InterfaceGeometry,
    pub cuts: Vec<ElementCut>,
    pub edge_labels: Vec<EdgeLabel>,
}

impl ClassifiedMesh {
    pub fn new(spec: &DomainSpec, iface: InterfaceGeometry) -> Result<Self, GeometryError> {
        let mesh = build_mesh(spec)?;
        let cuts = classify_elements(&mesh, &iface)?;
        let edge_labels = classify_edges(&mesh, &cuts);
        Ok(Self {
            mesh,
            iface,
            cuts,
            edge_labels,
        })
    }

    pub fn interface_elements(&self) -> impl Iterator<Item = &ElementCut> {
        self.cuts.iter().filter(|c| c.is_interface())
    }

    pub fn interface_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edge_labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == EdgeLabel::InteriorInterface)
            .map(|(i, _)| i)
    }
}
