//! Post-processing of predicted masks into the farm database: index and
//! road filtering, polygonization, distance grouping and GeoJSON export.

mod export;
mod filter;
mod group;
mod polygonize;

pub use export::{
    export_farms, farms_to_geojson, polygons_from_geojson, polygons_to_geojson, split_by_tags, state_of,
    FARM_PROPERTIES, UNKNOWN_STATE,
};
pub use filter::{filter_mask, FilterConfig};
pub use group::{group_farms, FarmGroup, DEFAULT_GROUP_DISTANCE_M};
pub use polygonize::{polygonize, FarmPolygon};
