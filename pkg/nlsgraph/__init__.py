# nlsgraph - ground states of the quintic NLS on noncompact metric graphs
