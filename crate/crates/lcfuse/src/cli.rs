//! Command-line surface. Every subcommand takes `--config FILE` plus one
//! flag per config key.

use clap::{Parser, Subcommand};

use crate::config_args;

#[derive(Debug, Parser)]
#[command(name = "lcfuse", version, about = "Probabilistic fusion of land-cover probability rasters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse fine and coarse class probabilities into a land-cover map.
    Fuse(FuseArgs),
    /// Score a label map against validation samples.
    Assess(AssessArgs),
    /// Generate a deterministic synthetic scene.
    Synth(SynthArgs),
    /// Extract endmembers and compute the cloud/shadow fraction map.
    Unmix(UnmixArgs),
    /// Stack NDVI and GLCM textures onto a band raster.
    Features(FeaturesArgs),
    /// Gap-fill and smooth a coarse time series; report missing fractions.
    Smooth(SmoothArgs),
    /// Train the reference classifier and predict class probabilities.
    Classify(ClassifyArgs),
}

config_args! {
    FuseArgs {
        /// `two_stage` (default) or `a_only`.
        mode,
        /// Class probabilities of the clean fine scene.
        priors_a,
        /// Class probabilities of the clouded fine scene (two_stage).
        priors_b,
        /// Coarse-grid class probabilities (optional).
        priors_m,
        /// Cloud/shadow mask of the clouded scene (two_stage).
        mask_b,
        /// Reflectance bands of the clouded scene, unmixed into the fraction map.
        bands_b,
        /// Precomputed cloud/shadow fraction map (instead of bands_b).
        f_map,
        /// Endmember CSV (role,b1..bB); extracted from bands_b when absent.
        endmembers,
        /// `auto` or a comma list of roles in endmember order.
        roles,
        /// Red band index for automatic roles (default 2).
        red_band,
        /// NIR band index for automatic roles (default 3).
        nir_band,
        /// Random N-FINDR restarts (default 16).
        nfindr_restarts,
        /// N-FINDR sweep cap per start (default 100).
        nfindr_max_iterations,
        /// Coarse time series, for missing fractions.
        coarse_series,
        /// Precomputed coarse missing-fraction raster (instead of coarse_series).
        m_fraction,
        /// Fine-to-coarse group map (built from the geometries when absent).
        groups,
        /// Output directory.
        out_dir,
        /// Worker threads (0 = all cores).
        threads,
    }
}

config_args! {
    AssessArgs {
        /// Label map to score.
        map,
        /// Sample CSV (x,y,label,split).
        samples,
        /// Mask restricting scoring to CLOUD/SHADOW pixels.
        mask,
        /// Comma-separated class names for the table.
        class_names,
        /// Write the matrix and accuracies as CSV here.
        csv,
    }
}

config_args! {
    SynthArgs {
        /// RNG seed (default 1).
        seed,
        /// Output directory.
        out_dir,
        width,
        height,
        pixel_size,
        /// Fine pixels per coarse pixel along each axis.
        coarse_factor,
        num_classes,
        /// Number of Voronoi regions in the ground truth.
        regions,
        /// Share of regions whose class differs at the date of the clean scene.
        change_fraction,
        /// Share of fine pixels flagged CLOUD.
        cloud_fraction,
        /// SHADOW pixels as a share of CLOUD pixels.
        shadow_ratio,
        noise_a,
        noise_b,
        epochs,
        missing_rate,
        series_noise,
        train_per_class,
        validation,
    }
}

config_args! {
    UnmixArgs {
        /// Reflectance bands.
        bands,
        /// Cloud/shadow mask; without it only endmembers are written.
        mask,
        /// Endmember CSV to use instead of extraction.
        endmembers,
        /// `auto` or a comma list of roles in endmember order.
        roles,
        red_band,
        nir_band,
        nfindr_restarts,
        nfindr_max_iterations,
        /// Output directory.
        out_dir,
    }
}

config_args! {
    FeaturesArgs {
        /// Reflectance bands.
        bands,
        red_band,
        nir_band,
        /// Band used for textures (default: nir_band).
        texture_band,
        grey_levels,
        window_size,
        offset_x,
        offset_y,
        /// Output band raster path.
        out,
    }
}

config_args! {
    SmoothArgs {
        /// Coarse time series.
        series,
        /// Savitzky-Golay window (default 5).
        sg_window,
        /// Savitzky-Golay polynomial order (default 2).
        sg_order,
        /// Output directory.
        out_dir,
    }
}

config_args! {
    ClassifyArgs {
        /// Feature band raster.
        features,
        /// Sample CSV; TRAIN rows are used.
        samples,
        /// Class count (default: largest sample label + 1).
        num_classes,
        /// Softmax temperature (default 1).
        temperature,
        /// Mask; training samples on non-CLEAR pixels are skipped.
        mask,
        /// Existing model to apply instead of training.
        model,
        /// Write the trained model here.
        model_out,
        /// Output probability raster path.
        out,
        /// Worker threads (0 = all cores).
        threads,
    }
}
