//! Scene input and output: environment maps, cameras, meshes, visibility,
//! projection of images onto texels, synthetic scenes and texture export.

pub mod bvh;
pub mod camera;
pub mod env;
pub mod frame;
pub mod image;
pub mod mesh;
pub mod projection;
pub mod synth;
pub mod textures;

use bvh::Bvh;
use mesh::{Mesh, TexelTable};

/// A mesh with its acceleration structure and texel table.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub mesh: Mesh,
    pub bvh: Bvh,
    pub texels: TexelTable,
}

impl SurfaceGeometry {
    pub fn new(mesh: Mesh, resolution: usize) -> Self {
        let bvh = Bvh::build(&mesh);
        let texels = TexelTable::build(&mesh, resolution);
        SurfaceGeometry { mesh, bvh, texels }
    }

    pub fn resolution(&self) -> usize {
        self.texels.resolution
    }
}
