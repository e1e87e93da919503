"""Greenhouse segmentation from 4-band satellite imagery."""
