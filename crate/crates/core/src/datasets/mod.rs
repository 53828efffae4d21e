//! Synthetic datasets: the swimmer images and directional point clouds.

mod directional;
mod swimmer;

pub use directional::{generate_directional_clusters, inline_clusters, separated_clusters, DirectionalCluster};
pub use swimmer::{generate_swimmer, Swimmer, SwimmerParams, SWIMMER_IMAGES, SWIMMER_PARTS};
