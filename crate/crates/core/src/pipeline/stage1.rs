use super::{CanonicalSetup, PipelineError};
use crate::geometry::Mesh;
use crate::guidance::{
    assemble_grid, conditioning_image, split_grid, with_retries, ConditioningImage, GuidanceBackend, GuidanceRequest,
};
use crate::image::Image;

/// Text prompt pair sent with every guidance request.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prompt {
    pub text: String,
    pub negative: String,
}

impl Prompt {
    pub fn new(text: &str) -> Self {
        Self {
            text: text.to_string(),
            negative: String::new(),
        }
    }
}

/// Reference views generated for the canonical setup.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    pub grid_image: Image,
    pub views: [Image; 4],
    pub conditioning: Vec<ConditioningImage>,
    pub conditioning_grid: Image,
}

/// Conditioning images of the four canonical views, tiled into one grid, sent
/// as a single generate request with full conditioning strength.
pub fn stage1_reference(
    mesh: &Mesh,
    prompt: &Prompt,
    setup: &CanonicalSetup,
    backend: &dyn GuidanceBackend,
    seed: u64,
) -> Result<ReferenceSet, PipelineError> {
    let conditioning = setup
        .cameras
        .iter()
        .map(|cam| conditioning_image(mesh, &setup.light, cam))
        .collect::<Result<Vec<_>, _>>()?;
    let tiles: Vec<Image> = conditioning.iter().map(|c| c.image.clone()).collect();
    let conditioning_grid = assemble_grid(&tiles)?;
    let request = GuidanceRequest::generate(&prompt.text, &prompt.negative, conditioning_grid.clone(), 1.0, seed)
        .with_views(conditioning.iter().map(|c| c.view()).collect());
    let grid_image = with_retries(|| backend.generate(&request)).map_err(PipelineError::Backend)?;
    let views = split_grid(&grid_image)?;
    Ok(ReferenceSet {
        grid_image,
        views,
        conditioning,
        conditioning_grid,
    })
}
