# nbvlab
