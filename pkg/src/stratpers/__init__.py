"""Learned stratifications and persistent stratified homotopy types of point clouds."""
