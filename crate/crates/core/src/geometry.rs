//! Room, AP and detector geometry: positions, normals, and the angles the
//! channel model consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-norm tolerance for emitted normal vectors.
pub const NORMAL_TOL: f64 = 1e-12;

/// A point or direction in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sub(&self, other: &Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Rectangular room; the AP plane sits at `height`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Room {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

impl Room {
    pub fn new(width: f64, depth: f64, height: f64) -> Result<Self> {
        if width <= 0.0 || depth <= 0.0 || height <= 0.0 {
            return Err(Error::Config(format!(
                "room dimensions must be positive (got {width} x {depth} x {height})"
            )));
        }
        Ok(Self {
            width,
            depth,
            height,
        })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        p.x >= 0.0
            && p.x <= self.width
            && p.y >= 0.0
            && p.y <= self.depth
            && p.z >= 0.0
            && p.z <= self.height
    }
}

/// One ceiling-mounted optical AP, modeled as a point source at the array
/// center. `array_side` is the VCSEL count per array edge; it scales power
/// only, never geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccessPoint {
    pub position: Vec3,
    pub array_side: usize,
    /// Boresight direction (unit norm), default straight down.
    pub orientation: Vec3,
}

impl AccessPoint {
    pub fn new(position: Vec3, array_side: usize, orientation: Vec3) -> Result<Self> {
        if array_side == 0 {
            return Err(Error::Config("array_side must be >= 1".into()));
        }
        let n = orientation.norm();
        if (n - 1.0).abs() > NORMAL_TOL {
            return Err(Error::Config(format!(
                "AP orientation must have unit norm (|n| = {n})"
            )));
        }
        Ok(Self {
            position,
            array_side,
            orientation,
        })
    }

    pub fn down_facing(position: Vec3, array_side: usize) -> Result<Self> {
        Self::new(position, array_side, Vec3::new(0.0, 0.0, -1.0))
    }
}

/// Multi-photodiode reconfigurable detector. Photodiode `m` points along the
/// direction given by its elevation (polar angle from zenith) and azimuth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorGeometry {
    pub num_photodiodes: usize,
    /// Polar angle from zenith per photodiode, radians.
    pub elevations: Vec<f64>,
    /// Azimuth per photodiode, radians.
    pub azimuths: Vec<f64>,
    /// Detection area per photodiode, m^2 (whole detector area / M).
    pub area_per_pd: f64,
    /// Physical photodiode area, m^2.
    pub pd_area_physical: f64,
    /// Optical filter / concentrator gain, dimensionless.
    pub pd_gain: f64,
    /// Field of view half-angle, radians.
    pub fov: f64,
}

impl DetectorGeometry {
    pub fn new(
        elevations: Vec<f64>,
        azimuths: Vec<f64>,
        area_per_pd: f64,
        pd_area_physical: f64,
        pd_gain: f64,
        fov: f64,
    ) -> Result<Self> {
        if elevations.is_empty() || elevations.len() != azimuths.len() {
            return Err(Error::Config(
                "detector needs matching, nonempty elevation/azimuth lists".into(),
            ));
        }
        if !(fov > 0.0 && fov <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "field of view must lie in (0, pi/2] (got {fov})"
            )));
        }
        if area_per_pd <= 0.0 || pd_area_physical <= 0.0 || pd_gain <= 0.0 {
            return Err(Error::Config("detector areas and gain must be positive".into()));
        }
        Ok(Self {
            num_photodiodes: elevations.len(),
            elevations,
            azimuths,
            area_per_pd,
            pd_area_physical,
            pd_gain,
            fov,
        })
    }

    /// M photodiodes at a common elevation with azimuths uniformly spaced
    /// over 2 pi. Guarantees distinct channel states for generic positions.
    pub fn uniform_ring(
        m: usize,
        elevation: f64,
        pd_area_physical: f64,
        total_area: f64,
        pd_gain: f64,
        fov: f64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("detector needs at least one photodiode".into()));
        }
        let azimuths: Vec<f64> = (0..m)
            .map(|i| 2.0 * std::f64::consts::PI * i as f64 / m as f64)
            .collect();
        Self::new(
            vec![elevation; m],
            azimuths,
            total_area / m as f64,
            pd_area_physical,
            pd_gain,
            fov,
        )
    }
}

/// Class assigned by `classify_users`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UserClass {
    Weak,
    Strong,
    Unassigned,
}

/// A user terminal on the receiving plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserTerminal {
    pub id: usize,
    pub position: Vec3,
    pub detector: DetectorGeometry,
    pub class: UserClass,
}

impl UserTerminal {
    pub fn new(id: usize, position: Vec3, detector: DetectorGeometry) -> Self {
        Self {
            id,
            position,
            detector,
            class: UserClass::Unassigned,
        }
    }
}

/// Rule used to split users into weak and strong classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyRule {
    /// Strong iff dist(l, i) <= d_th for every AP l.
    DistanceThreshold { d_th: f64 },
    /// Rank by aggregate received power; top half strong. Guarantees equal
    /// halves for even K.
    MedianSplit,
}

/// Place `rows x cols` APs on a uniform ceiling grid, normals pointing down.
///
/// APs are centered in their grid cells, so a 4x4 grid over an 8 m x 8 m room
/// starts at (1, 1) with 2 m spacing.
pub fn place_ap_grid(room: &Room, rows: usize, cols: usize, array_side: usize) -> Result<Vec<AccessPoint>> {
    if rows == 0 || cols == 0 {
        return Err(Error::Config("AP grid needs at least one row and column".into()));
    }
    let dx = room.width / cols as f64;
    let dy = room.depth / rows as f64;
    let mut aps = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let pos = Vec3::new(
                (c as f64 + 0.5) * dx,
                (r as f64 + 0.5) * dy,
                room.height,
            );
            aps.push(AccessPoint::down_facing(pos, array_side)?);
        }
    }
    Ok(aps)
}

/// Normal vector of photodiode `m`: [sin t cos a, sin t sin a, cos t].
pub fn photodiode_normal(detector: &DetectorGeometry, m: usize) -> Result<Vec3> {
    if m >= detector.num_photodiodes {
        return Err(Error::IndexOutOfRange {
            what: "photodiode",
            index: m,
            len: detector.num_photodiodes,
        });
    }
    let (theta, alpha) = (detector.elevations[m], detector.azimuths[m]);
    Ok(Vec3::new(
        theta.sin() * alpha.cos(),
        theta.sin() * alpha.sin(),
        theta.cos(),
    ))
}

fn angle_between(unit: &Vec3, towards: &Vec3) -> Result<f64> {
    let d = towards.norm();
    if d == 0.0 {
        return Err(Error::DegenerateGeometry(
            "transmitter and user positions coincide".into(),
        ));
    }
    Ok((unit.dot(towards) / d).clamp(-1.0, 1.0).acos())
}

/// Irradiance angle at the transmitter: angle between the AP boresight and
/// the direction from the AP to the user. Zero on boresight, in [0, pi].
pub fn irradiance_angle(ap: &AccessPoint, user: &UserTerminal) -> Result<f64> {
    let to_user = user.position.sub(&ap.position);
    angle_between(&ap.orientation, &to_user)
}

/// Incidence angle at photodiode `m`: angle between the photodiode normal and
/// the direction from the user up to the AP. The FoV rect() cut of the
/// channel model is applied by the caller.
pub fn incidence_angle(ap: &AccessPoint, user: &UserTerminal, m: usize) -> Result<f64> {
    let n = photodiode_normal(&user.detector, m)?;
    let to_ap = ap.position.sub(&user.position);
    angle_between(&n, &to_ap)
}

/// Split users into (weak ids, strong ids).
///
/// `received_power[k]` is the aggregate received optical power of `users[k]`
/// (any monotone proxy works for the distance rule, which ignores it).
/// Median split sorts by (power, id) ascending and labels the top half
/// strong; for odd K the extra user is weak. Ties break by ascending id.
pub fn classify_users(
    users: &[UserTerminal],
    aps: &[AccessPoint],
    received_power: &[f64],
    rule: ClassifyRule,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if users.is_empty() {
        return Err(Error::EmptyClass("no users to classify".into()));
    }
    match rule {
        ClassifyRule::DistanceThreshold { d_th } => {
            let mut weak = Vec::new();
            let mut strong = Vec::new();
            for user in users {
                let all_close = aps
                    .iter()
                    .all(|ap| ap.position.sub(&user.position).norm() <= d_th);
                if all_close {
                    strong.push(user.id);
                } else {
                    weak.push(user.id);
                }
            }
            if weak.is_empty() || strong.is_empty() {
                return Err(Error::EmptyClass(format!(
                    "distance threshold {d_th} m left {} weak / {} strong users",
                    weak.len(),
                    strong.len()
                )));
            }
            Ok((weak, strong))
        }
        ClassifyRule::MedianSplit => {
            if received_power.len() != users.len() {
                return Err(Error::Config(
                    "received_power must have one entry per user".into(),
                ));
            }
            let mut order: Vec<usize> = (0..users.len()).collect();
            order.sort_by(|&a, &b| {
                received_power[a]
                    .total_cmp(&received_power[b])
                    .then(users[a].id.cmp(&users[b].id))
            });
            let weak_count = users.len() - users.len() / 2;
            let mut weak: Vec<usize> = order[..weak_count].iter().map(|&i| users[i].id).collect();
            let mut strong: Vec<usize> = order[weak_count..].iter().map(|&i| users[i].id).collect();
            weak.sort_unstable();
            strong.sort_unstable();
            Ok((weak, strong))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn test_detector() -> DetectorGeometry {
        DetectorGeometry::uniform_ring(4, std::f64::consts::FRAC_PI_4, 15e-6, 60e-6, 1.0, 60f64.to_radians())
            .unwrap()
    }

    fn user_at(x: f64, y: f64, z: f64) -> UserTerminal {
        UserTerminal::new(0, Vec3::new(x, y, z), test_detector())
    }

    #[test]
    fn grid_4x4_in_8m_room_has_2m_spacing() {
        let room = Room::new(8.0, 8.0, 3.0).unwrap();
        let aps = place_ap_grid(&room, 4, 4, 1).unwrap();
        assert_eq!(aps.len(), 16);
        assert_eq!(aps[0].position, Vec3::new(1.0, 1.0, 3.0));
        assert_eq!(aps[1].position, Vec3::new(3.0, 1.0, 3.0));
        assert_eq!(aps[15].position, Vec3::new(7.0, 7.0, 3.0));
        for ap in &aps {
            assert_eq!(ap.position.z, 3.0);
            assert_eq!(ap.orientation, Vec3::new(0.0, 0.0, -1.0));
        }
    }

    #[test]
    fn single_ap_sits_at_room_centroid() {
        let room = Room::new(8.0, 8.0, 3.0).unwrap();
        let aps = place_ap_grid(&room, 1, 1, 1).unwrap();
        assert_eq!(aps[0].position, Vec3::new(4.0, 4.0, 3.0));
    }

    #[test]
    fn grid_carries_array_side() {
        let room = Room::new(8.0, 8.0, 3.0).unwrap();
        let aps = place_ap_grid(&room, 4, 4, 5).unwrap();
        assert_eq!(aps.len(), 16);
        assert!(aps.iter().all(|ap| ap.array_side == 5));
    }

    #[test]
    fn zero_rows_is_config_error() {
        let room = Room::new(8.0, 8.0, 3.0).unwrap();
        assert!(matches!(place_ap_grid(&room, 0, 4, 1), Err(Error::Config(_))));
    }

    #[test]
    fn photodiode_normal_zenith_and_equator() {
        let det = DetectorGeometry::new(
            vec![0.0, std::f64::consts::FRAC_PI_2],
            vec![1.234, 0.0],
            1e-6,
            1e-6,
            1.0,
            1.0,
        )
        .unwrap();
        let zenith = photodiode_normal(&det, 0).unwrap();
        assert_relative_eq!(zenith.x, 0.0, epsilon = NORMAL_TOL);
        assert_relative_eq!(zenith.y, 0.0, epsilon = NORMAL_TOL);
        assert_relative_eq!(zenith.z, 1.0, epsilon = NORMAL_TOL);
        let eq = photodiode_normal(&det, 1).unwrap();
        assert_relative_eq!(eq.x, 1.0, epsilon = NORMAL_TOL);
        assert_relative_eq!(eq.z, 0.0, epsilon = NORMAL_TOL);
    }

    #[test]
    fn photodiode_normal_45deg_oracle() {
        // theta = pi/4, alpha = pi/2 -> (0, sqrt(2)/2, sqrt(2)/2)
        let det = DetectorGeometry::new(
            vec![std::f64::consts::FRAC_PI_4],
            vec![std::f64::consts::FRAC_PI_2],
            1e-6,
            1e-6,
            1.0,
            1.0,
        )
        .unwrap();
        let n = photodiode_normal(&det, 0).unwrap();
        let s2 = std::f64::consts::SQRT_2 / 2.0;
        assert_relative_eq!(n.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(n.y, s2, epsilon = 1e-15);
        assert_relative_eq!(n.z, s2, epsilon = 1e-15);
        assert_relative_eq!(n.norm(), 1.0, epsilon = NORMAL_TOL);
    }

    #[test]
    fn photodiode_index_out_of_range() {
        let det = test_detector();
        assert!(matches!(
            photodiode_normal(&det, 99),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn irradiance_boresight_and_45deg() {
        let ap = AccessPoint::down_facing(Vec3::new(0.0, 0.0, 3.0), 1).unwrap();
        let below = user_at(0.0, 0.0, 0.0);
        assert_relative_eq!(irradiance_angle(&ap, &below).unwrap(), 0.0, epsilon = 1e-12);
        let offset = user_at(3.0, 0.0, 0.0);
        assert_relative_eq!(
            irradiance_angle(&ap, &offset).unwrap(),
            std::f64::consts::FRAC_PI_4,
            epsilon = 1e-12
        );
    }

    #[test]
    fn irradiance_vector_algebra_oracle() {
        // AP (1,1,3), user (4,5,0): angle = arccos(3/sqrt(34))
        let ap = AccessPoint::down_facing(Vec3::new(1.0, 1.0, 3.0), 1).unwrap();
        let user = user_at(4.0, 5.0, 0.0);
        assert_relative_eq!(
            irradiance_angle(&ap, &user).unwrap(),
            1.030_376_826_524_312_5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn coincident_positions_are_degenerate() {
        let ap = AccessPoint::down_facing(Vec3::new(1.0, 1.0, 3.0), 1).unwrap();
        let user = user_at(1.0, 1.0, 3.0);
        assert!(matches!(
            irradiance_angle(&ap, &user),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn incidence_zenith_pd_under_ap_is_zero() {
        let det = DetectorGeometry::new(vec![0.0], vec![0.0], 1e-6, 1e-6, 1.0, 1.0).unwrap();
        let user = UserTerminal::new(0, Vec3::new(2.0, 2.0, 0.0), det);
        let ap = AccessPoint::down_facing(Vec3::new(2.0, 2.0, 3.0), 1).unwrap();
        assert_relative_eq!(incidence_angle(&ap, &user, 0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn incidence_tilted_pd_under_ap_is_45deg() {
        let det = DetectorGeometry::new(
            vec![std::f64::consts::FRAC_PI_4],
            vec![0.7],
            1e-6,
            1e-6,
            1.0,
            1.0,
        )
        .unwrap();
        let user = UserTerminal::new(0, Vec3::new(2.0, 2.0, 0.0), det);
        let ap = AccessPoint::down_facing(Vec3::new(2.0, 2.0, 3.0), 1).unwrap();
        assert_relative_eq!(
            incidence_angle(&ap, &user, 0).unwrap(),
            std::f64::consts::FRAC_PI_4,
            epsilon = 1e-12
        );
    }

    #[test]
    fn median_split_center_strong_corner_weak() {
        let users = vec![user_with_id(0, 4.0, 4.0), user_with_id(1, 0.1, 0.1)];
        let (weak, strong) = classify_users(&users, &[], &[0.9, 0.1], ClassifyRule::MedianSplit).unwrap();
        assert_eq!(weak, vec![1]);
        assert_eq!(strong, vec![0]);
    }

    #[test]
    fn median_split_equal_halves_for_k20() {
        let users: Vec<UserTerminal> = (0..20).map(|i| user_with_id(i, i as f64 * 0.1, 0.0)).collect();
        let powers: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let (weak, strong) = classify_users(&users, &[], &powers, ClassifyRule::MedianSplit).unwrap();
        assert_eq!(weak.len(), 10);
        assert_eq!(strong.len(), 10);
        assert_eq!(weak, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn median_split_tie_breaks_by_ascending_id() {
        let users: Vec<UserTerminal> = (0..4).map(|i| user_with_id(i, 1.0, 1.0)).collect();
        let (weak, strong) = classify_users(&users, &[], &[1.0; 4], ClassifyRule::MedianSplit).unwrap();
        assert_eq!(weak, vec![0, 1]);
        assert_eq!(strong, vec![2, 3]);
    }

    #[test]
    fn distance_threshold_partitions_or_errors() {
        let room = Room::new(8.0, 8.0, 3.0).unwrap();
        let aps = place_ap_grid(&room, 2, 2, 1).unwrap();
        let users = vec![user_with_id(0, 4.0, 4.0), user_with_id(1, 0.0, 0.0)];
        let (weak, strong) = classify_users(
            &users,
            &aps,
            &[0.0, 0.0],
            ClassifyRule::DistanceThreshold { d_th: 4.6 },
        )
        .unwrap();
        assert_eq!(strong, vec![0]);
        assert_eq!(weak, vec![1]);
        // A threshold below every distance empties the strong class.
        assert!(matches!(
            classify_users(&users, &aps, &[0.0, 0.0], ClassifyRule::DistanceThreshold { d_th: 0.1 }),
            Err(Error::EmptyClass(_))
        ));
    }

    fn user_with_id(id: usize, x: f64, y: f64) -> UserTerminal {
        UserTerminal::new(id, Vec3::new(x, y, 0.0), test_detector())
    }

    proptest! {
        #[test]
        fn normals_are_unit(theta in 0.0..std::f64::consts::PI, alpha in 0.0..(2.0 * std::f64::consts::PI)) {
            let det = DetectorGeometry::new(vec![theta], vec![alpha], 1e-6, 1e-6, 1.0, 1.0).unwrap();
            let n = photodiode_normal(&det, 0).unwrap();
            prop_assert!((n.norm() - 1.0).abs() <= NORMAL_TOL);
        }

        #[test]
        fn angles_invariant_under_rigid_translation(
            ax in -2.0..2.0f64, ay in -2.0..2.0f64,
            ux in -2.0..2.0f64, uy in -2.0..2.0f64,
            tx in -5.0..5.0f64, ty in -5.0..5.0f64, tz in -5.0..5.0f64,
        ) {
            let ap = AccessPoint::down_facing(Vec3::new(ax, ay, 3.0), 1).unwrap();
            let user = user_at(ux, uy, 0.0);
            let ap_t = AccessPoint::down_facing(Vec3::new(ax + tx, ay + ty, 3.0 + tz), 1).unwrap();
            let user_t = user_at(ux + tx, uy + ty, tz);
            let phi = irradiance_angle(&ap, &user).unwrap();
            let phi_t = irradiance_angle(&ap_t, &user_t).unwrap();
            prop_assert!((phi - phi_t).abs() < 1e-10);
            let psi = incidence_angle(&ap, &user, 0).unwrap();
            let psi_t = incidence_angle(&ap_t, &user_t, 0).unwrap();
            prop_assert!((psi - psi_t).abs() < 1e-10);
        }

        #[test]
        fn median_split_is_a_partition(k in 1usize..15) {
            let users: Vec<UserTerminal> = (0..k).map(|i| user_with_id(i, i as f64, 0.0)).collect();
            let powers: Vec<f64> = (0..k).map(|i| (i * 7 % 5) as f64).collect();
            let (weak, strong) = classify_users(&users, &[], &powers, ClassifyRule::MedianSplit).unwrap();
            prop_assert_eq!(weak.len() + strong.len(), k);
            let mut all: Vec<usize> = weak.iter().chain(strong.iter()).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..k).collect::<Vec<_>>());
            if k % 2 == 0 {
                prop_assert_eq!(weak.len(), strong.len());
            }
        }
    }
}
