//! Closed-form nanoparticle and treatment arithmetic.
//!
//! Conversions between the number of particles extravasating into a
//! penetration column and the injected dose, the per-cell lethal particle
//! threshold, the Stokes–Einstein radius and the equilibrium dissociation
//! constant. Everything here is a pure function of its inputs.
//!
//! Units at the type boundary are the customary ones (g/mol, mol/L, g, mm³,
//! s, m, cm²/s, 1/(M·s)); internally everything is SI plus mol.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::num::Real;

/// Avogadro constant, 1/mol.
pub const AVOGADRO: f64 = 6.022_140_76e23;

/// Stokes–Einstein proportionality, nm·cm²/s. Pins D = 1e-6 cm²/s to r = 2.5 nm.
pub const STOKES_EINSTEIN_NM_CM2_S: f64 = 2.5e-6;

const LITRES_PER_M3: f64 = 1.0e3;
const M3_PER_MM3: f64 = 1.0e-9;
const NANOMOLAR_PER_MOLAR: f64 = 1.0e9;

fn positive<T: Real>(name: &'static str, value: T) -> Result<T> {
    if value.is_finite() && value > T::zero() {
        Ok(value)
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

fn non_negative<T: Real>(name: &'static str, value: T) -> Result<T> {
    if value.is_finite() && value >= T::zero() {
        Ok(value)
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}

/// Cytotoxic payload carried by the particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrugModel<T> {
    pub name: String,
    /// g/mol
    pub molar_mass: T,
    /// IC90, mol/L
    pub potency_ic90: T,
}

impl<T: Real> DrugModel<T> {
    pub fn new(name: impl Into<String>, molar_mass: T, potency_ic90: T) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            molar_mass: positive("molar_mass", molar_mass)?,
            potency_ic90: positive("potency_ic90", potency_ic90)?,
        })
    }

    /// Doxorubicin: 543.52 g/mol, IC90 of 10 μM.
    pub fn doxorubicin() -> Self {
        Self {
            name: "doxorubicin".into(),
            molar_mass: T::lit(543.52),
            potency_ic90: T::lit(10.0e-6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("molar_mass", self.molar_mass)?;
        positive("potency_ic90", self.potency_ic90)?;
        Ok(())
    }
}

impl<T: Real> Default for DrugModel<T> {
    fn default() -> Self {
        Self::doxorubicin()
    }
}

/// Murine host and tumour assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HostModel<T> {
    /// Body mass, g.
    pub weight: T,
    /// Fraction of the injected dose that reaches the tumour, in (0, 1].
    pub pid_fraction: T,
    /// mm³
    pub tumour_volume: T,
    /// Circulation window over which particles are released, s.
    pub circulation_time: T,
    /// Edge of one cell / compartment, m.
    pub cell_length: T,
    pub receptors_per_cell: u64,
}

impl<T: Real> HostModel<T> {
    /// 20 g mouse, 1 % PID at 48 h, 125 mm³ tumour, 10 μm cells, 1e5 receptors.
    pub fn mouse() -> Self {
        Self {
            weight: T::lit(20.0),
            pid_fraction: T::lit(0.01),
            tumour_volume: T::lit(125.0),
            circulation_time: T::lit(48.0 * 3600.0),
            cell_length: T::lit(10.0e-6),
            receptors_per_cell: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("weight", self.weight)?;
        positive("pid_fraction", self.pid_fraction)?;
        if self.pid_fraction > T::one() {
            return Err(invalid("pid_fraction", "must be <= 1"));
        }
        positive("tumour_volume", self.tumour_volume)?;
        positive("circulation_time", self.circulation_time)?;
        positive("cell_length", self.cell_length)?;
        if self.receptors_per_cell == 0 {
            return Err(invalid("receptors_per_cell", "must be >= 1"));
        }
        Ok(())
    }

    /// Volume of one cubic cell compartment, litres.
    pub fn compartment_volume_litres(&self) -> T {
        self.cell_length.powi(3) * T::lit(LITRES_PER_M3)
    }
}

impl<T: Real> Default for HostModel<T> {
    fn default() -> Self {
        Self::mouse()
    }
}

/// Depth of tissue the particles have to cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenetrationGeometry<T> {
    /// m
    pub compartment_length: T,
    pub n_cells: usize,
}

impl<T: Real> PenetrationGeometry<T> {
    pub fn new(compartment_length: T, n_cells: usize) -> Result<Self> {
        positive("compartment_length", compartment_length)?;
        if n_cells == 0 {
            return Err(invalid("n_cells", "must be >= 1"));
        }
        Ok(Self {
            compartment_length,
            n_cells,
        })
    }

    /// 22 cells of 10 μm.
    pub fn standard() -> Self {
        Self {
            compartment_length: T::lit(10.0e-6),
            n_cells: 22,
        }
    }

    /// Total depth, m.
    pub fn total_depth(&self) -> T {
        self.compartment_length * T::from_usize(self.n_cells).unwrap_or_else(T::nan)
    }
}

impl<T: Real> Default for PenetrationGeometry<T> {
    fn default() -> Self {
        Self::standard()
    }
}

/// One nanoparticle species: the evolvable parameters plus fixed kinetics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NanoparticleDesign<T> {
    /// cm²/s
    pub diffusion: T,
    /// 1/(M·s)
    pub binding_rate: T,
    /// 1/s
    pub dissoc_rate: T,
    /// 1/s
    pub internal_rate: T,
    /// Particles entering the scenario column over the circulation window.
    pub extravasated_count: T,
    /// Drug molecules per particle.
    pub payload_count: T,
}

/// Search-space limits for one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignRanges<T> {
    pub diffusion: (T, T),
    pub binding_rate: (T, T),
    pub extravasated_count: (T, T),
    pub payload_count: (T, T),
}

impl<T: Real> DesignRanges<T> {
    pub fn standard() -> Self {
        Self {
            diffusion: (T::lit(1e-8), T::lit(1e-6)),
            binding_rate: (T::lit(1e3), T::lit(1e6)),
            extravasated_count: (T::lit(1e4), T::lit(1e6)),
            payload_count: (T::lit(1e2), T::lit(1e4)),
        }
    }
}

impl<T: Real> NanoparticleDesign<T> {
    /// Dissociation rate used for every design, 1/s.
    pub fn default_dissoc_rate() -> T {
        T::lit(1e-4)
    }

    /// Internalisation rate used for every design, 1/s.
    pub fn default_internal_rate() -> T {
        T::lit(1e-5)
    }

    /// Design with the standard fixed kinetics.
    pub fn new(diffusion: T, binding_rate: T, extravasated_count: T, payload_count: T) -> Result<Self> {
        let design = Self {
            diffusion,
            binding_rate,
            dissoc_rate: Self::default_dissoc_rate(),
            internal_rate: Self::default_internal_rate(),
            extravasated_count,
            payload_count,
        };
        design.validate()?;
        Ok(design)
    }

    /// Physical sanity only; the search ranges are checked by [`Self::within`].
    /// A zero binding rate or zero particles are legal (null experiments).
    pub fn validate(&self) -> Result<()> {
        positive("diffusion", self.diffusion)?;
        non_negative("binding_rate", self.binding_rate)?;
        positive("dissoc_rate", self.dissoc_rate)?;
        positive("internal_rate", self.internal_rate)?;
        non_negative("extravasated_count", self.extravasated_count)?;
        positive("payload_count", self.payload_count)?;
        Ok(())
    }

    pub fn within(&self, ranges: &DesignRanges<T>) -> bool {
        let inside = |v: T, (lo, hi): (T, T)| v >= lo && v <= hi;
        inside(self.diffusion, ranges.diffusion)
            && inside(self.binding_rate, ranges.binding_rate)
            && inside(self.extravasated_count, ranges.extravasated_count)
            && inside(self.payload_count, ranges.payload_count)
    }

    /// Hydrodynamic radius, nm.
    pub fn radius_nm(&self) -> T {
        radius_from_diffusion(self.diffusion)
    }

    /// Equilibrium dissociation constant, nM.
    pub fn dissociation_constant_nm(&self) -> T {
        dissociation_constant(self.binding_rate, self.dissoc_rate)
    }
}

/// Drug, host and geometry bundled for dose arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Dosimetry<T> {
    pub drug: DrugModel<T>,
    pub host: HostModel<T>,
    pub geometry: PenetrationGeometry<T>,
}

impl<T: Real> Dosimetry<T> {
    pub fn new(drug: DrugModel<T>, host: HostModel<T>, geometry: PenetrationGeometry<T>) -> Result<Self> {
        drug.validate()?;
        host.validate()?;
        PenetrationGeometry::new(geometry.compartment_length, geometry.n_cells)?;
        Ok(Self { drug, host, geometry })
    }

    /// Doxorubicin in the standard mouse over a 22-cell column.
    pub fn standard() -> Self {
        Self {
            drug: DrugModel::doxorubicin(),
            host: HostModel::mouse(),
            geometry: PenetrationGeometry::standard(),
        }
    }

    /// Dimensionless factor `M·V_t / (W·PID·S²·L·N_A)` in (mg/kg) per drug molecule.
    fn dose_per_molecule(&self) -> T {
        let column_volume =
            self.host.cell_length * self.host.cell_length * self.geometry.total_depth();
        let tumour_volume = self.host.tumour_volume * T::lit(M3_PER_MM3);
        // grams of drug in the whole tumour per molecule in the column
        let grams = self.drug.molar_mass / T::lit(AVOGADRO) * (tumour_volume / column_volume)
            / self.host.pid_fraction;
        // g per g of body mass == 1e6 mg/kg
        grams / self.host.weight * T::lit(1.0e6)
    }

    /// Injected dose, mg of drug per kg of body mass.
    pub fn injected_dose(&self, extravasated_count: T, payload_count: T) -> Result<T> {
        non_negative("extravasated_count", extravasated_count)?;
        positive("payload_count", payload_count)?;
        Ok(extravasated_count * payload_count * self.dose_per_molecule())
    }

    pub fn design_dose(&self, design: &NanoparticleDesign<T>) -> Result<T> {
        self.injected_dose(design.extravasated_count, design.payload_count)
    }

    /// Particles reaching the column for a given injected dose (mg/kg).
    pub fn extravasated_count(&self, dose: T, payload_count: T) -> Result<T> {
        non_negative("dose", dose)?;
        positive("payload_count", payload_count)?;
        Ok(dose / (payload_count * self.dose_per_molecule()))
    }

    pub fn lethal_threshold(&self, payload_count: T) -> Result<u64> {
        lethal_threshold(payload_count, &self.drug, self.host.cell_length)
    }
}

/// Internalised particles needed to deliver the IC90 payload to one cell:
/// `P · S³ · N_A / E`, rounded to the nearest particle.
pub fn lethal_threshold<T: Real>(payload_count: T, drug: &DrugModel<T>, cell_length: T) -> Result<u64> {
    positive("payload_count", payload_count)?;
    positive("cell_length", cell_length)?;
    let litres = cell_length.powi(3) * T::lit(LITRES_PER_M3);
    let molecules = drug.potency_ic90 * litres * T::lit(AVOGADRO);
    let count = (molecules / payload_count).round();
    count
        .to_u64()
        .map(|n| n.max(1))
        .ok_or_else(|| invalid("payload_count", "threshold does not fit in u64"))
}

/// Stokes–Einstein radius in nm for a diffusion coefficient in cm²/s.
pub fn radius_from_diffusion<T: Real>(diffusion: T) -> T {
    T::lit(STOKES_EINSTEIN_NM_CM2_S) / diffusion
}

/// `k_d / k_a` in nM.
pub fn dissociation_constant<T: Real>(binding_rate: T, dissoc_rate: T) -> T {
    dissoc_rate / binding_rate * T::lit(NANOMOLAR_PER_MOLAR)
}
